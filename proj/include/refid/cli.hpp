#pragma once

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "refid/dataset.hpp"
#include "refid/grasp.hpp"
#include "refid/identify.hpp"
#include "refid/model_io.hpp"
#include "refid/raster.hpp"
#include "refid/service.hpp"
#include "refid/synth.hpp"

namespace refid::cli {

enum ExitCode : int { kOk = 0, kValidation = 1, kRuntime = 2 };

struct Globals {
  std::uint64_t seed = 7;
  bool quiet = false;
  bool json = false;
};

struct Io {
  std::istream& in;
  std::ostream& out;
  std::ostream& err;
  const Globals& g;

  // informational message on stderr, suppressed by --quiet
  void note(const std::string& msg) const {
    if (!g.quiet) err << msg << '\n';
  }
};

namespace detail {

inline std::array<int, 5> parse_env_counts(const std::string& text) {
  std::array<int, 5> out{};
  std::stringstream ss(text);
  std::string item;
  std::size_t n = 0;
  while (std::getline(ss, item, ',')) {
    if (n >= out.size()) throw Error(Errc::schema_error, "--envs takes exactly 5 counts");
    std::size_t used = 0;
    int v = 0;
    try {
      v = std::stoi(item, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used != item.size() || item.empty()) throw Error(Errc::schema_error, "--envs: '" + item + "' is not an integer");
    out[n++] = v;
  }
  if (n != out.size()) throw Error(Errc::schema_error, "--envs takes exactly 5 counts");
  return out;
}

struct LoadedModel {
  ModelFile model;
  Corpus corpus;
};

inline LoadedModel load_both(const std::string& model_path, const std::string& corpus_path) {
  LoadedModel m;
  m.model = load_model(model_path);
  m.corpus = load_corpus(corpus_path, m.model.params.lexicon);
  return m;
}

inline void write_file_or_stdout(const std::string& path, const std::string& text, std::ostream& out) {
  if (path.empty() || path == "-")
    out << text;
  else
    write_text_file(path, text);
}

}  // namespace detail

// ---------------------------------------------------------------------------
// subcommands

struct SynthArgs {
  std::string out;
  std::string envs = "5,5,5,5,2";
  int replicas = 10;
  int descriptions = 5;
  double noise = 0.05;
  std::string rasters;
};

inline int cmd_synth(const SynthArgs& a, const Io& io) {
  synth::CorpusSpec spec;
  spec.env_counts = detail::parse_env_counts(a.envs);
  spec.replicas = a.replicas;
  spec.descriptions_per_object = a.descriptions;
  spec.noise = a.noise;
  spec.seed = io.g.seed;
  const Lexicon lex = default_lexicon();
  const auto gen = synth::generate_corpus(spec, lex);
  detail::write_file_or_stdout(a.out, dump_corpus(gen.corpus, lex), io.out);

  if (!a.rasters.empty()) {
    std::filesystem::create_directories(a.rasters);
    for (const auto& env : gen.corpus.environments) {
      const auto [img, mask] = synth::rasterize(env);
      write_ppm(std::filesystem::path(a.rasters) / (env.id + ".ppm"), img);
      write_pgm(std::filesystem::path(a.rasters) / (env.id + ".mask.pgm"), mask);
    }
  }
  if (!a.out.empty() && a.out != "-") {
    if (io.g.json)
      io.out << Json{{"corpus", a.out},
                     {"environments", gen.corpus.environments.size()},
                     {"tasks", gen.corpus.tasks.size()},
                     {"seed", spec.seed}}
                    .dump()
             << '\n';
    else
      io.note("wrote " + a.out + ": " + std::to_string(gen.corpus.environments.size()) + " environments, " +
              std::to_string(gen.corpus.tasks.size()) + " tasks");
  }
  return kOk;
}

struct TrainArgs {
  std::string corpus, out;
  std::string method = "bfgs";
  double ridge = 1e-6;
  double tol = 1e-6;
  int max_iters = 500;
  std::string init = "zeros";
};

inline int cmd_train(const TrainArgs& a, const Io& io) {
  FitConfig cfg;
  cfg.method = a.method == "newton" ? FitMethod::newton : FitMethod::bfgs;
  cfg.ridge = a.ridge;
  cfg.grad_tol = a.tol;
  cfg.max_iters = a.max_iters;
  cfg.init = a.init == "gaussian" ? FitInit::seeded_gaussian : FitInit::zeros;
  cfg.seed = io.g.seed;
  cfg.validate();

  const Lexicon lex = default_lexicon();
  const Corpus corpus = load_corpus(a.corpus, lex);
  auto fitted = fit(lex, corpus.tasks, corpus.environments, cfg);
  save_model({fitted.params, cfg.ridge, fitted.report}, a.out);

  const auto& r = fitted.report;
  if (io.g.json) {
    io.out << Json{{"model", a.out},
                   {"method", std::string(method_name(r.method))},
                   {"iterations", r.iterations},
                   {"evaluations", r.evaluations},
                   {"final_loss", r.final_loss},
                   {"grad_norm", r.grad_norm},
                   {"converged", r.converged},
                   {"status", r.status}}
                  .dump()
           << '\n';
  } else {
    char buf[256];
    std::snprintf(buf, sizeof buf, "%s: %d iterations, loss %.9g, |grad|inf %.3g (%s)\n",
                  std::string(method_name(r.method)).c_str(), r.iterations, r.final_loss, r.grad_norm, r.status.c_str());
    io.out << buf;
  }
  if (!r.converged) {
    io.err << "error: fit did not converge (" << r.status << "); model written to " << a.out << '\n';
    return kRuntime;
  }
  return kOk;
}

struct EvalArgs {
  std::string corpus, model, filter;
};

inline int cmd_eval(const EvalArgs& a, const Io& io) {
  const TaskFilter filter = parse_filter(a.filter);
  const auto m = detail::load_both(a.model, a.corpus);
  const EvalReport rep = evaluate_report(m.model.params, m.corpus, filter);
  if (io.g.json)
    io.out << eval_to_json(rep).dump(1) << '\n';
  else
    io.out << eval_table(rep);
  return kOk;
}

struct CvArgs {
  std::string corpus;
  std::string mode = "env";
  std::string method = "bfgs";
  double ridge = 1e-6;
  double tol = 1e-6;
  unsigned workers = 0;
};

inline int cmd_cv(const CvArgs& a, const Io& io) {
  FitConfig cfg;
  cfg.method = a.method == "newton" ? FitMethod::newton : FitMethod::bfgs;
  cfg.ridge = a.ridge;
  cfg.grad_tol = a.tol;
  cfg.validate();
  const Lexicon lex = default_lexicon();
  const Corpus corpus = load_corpus(a.corpus, lex);
  const CvReport rep = cross_validate(lex, corpus, cfg, a.mode == "cat" ? CvMode::category : CvMode::env, a.workers);
  if (io.g.json)
    io.out << cv_to_json(rep).dump(1) << '\n';
  else
    io.out << cv_table(rep);
  int bad = 0;
  for (const auto& f : rep.folds)
    if (!f.fit.converged) ++bad;
  if (bad) {
    io.err << "error: " << bad << " fold fit(s) did not converge\n";
    return kRuntime;
  }
  return kOk;
}

struct IdentifyArgs {
  std::string model, corpus, env;
};

/// One line per query: description tokens, or `!select <object>` to show what
/// the oracle makes of that object under the last description.
inline int cmd_identify(const IdentifyArgs& a, const Io& io) {
  const auto m = detail::load_both(a.model, a.corpus);
  const ModelParams& params = m.model.params;
  const Environment& env = m.corpus.env(a.env);
  const synth::OracleTruth truth = synth::membership_grades(params.lexicon, env);
  Description last;

  if (!io.g.json && !io.g.quiet) {
    io.out << "environment " << env.id << " (" << env.category << "):";
    for (const auto& o : env.objects) io.out << ' ' << o.id;
    io.out << "\n";
  }

  std::string line;
  while (std::getline(io.in, line)) {
    std::string_view text(line);
    while (!text.empty() && std::isspace(static_cast<unsigned char>(text.back()))) text.remove_suffix(1);
    while (!text.empty() && std::isspace(static_cast<unsigned char>(text.front()))) text.remove_prefix(1);

    if (text.starts_with("!select")) {
      std::string obj(text.substr(7));
      obj.erase(0, obj.find_first_not_of(" \t"));
      const auto idx = env.index_of(obj);
      if (!idx) {
        io.err << "error: " << Error(Errc::object_not_found, obj).what() << '\n';
        continue;
      }
      const auto selected = synth::oracle_select(truth, last);
      const bool chosen = std::find(selected.begin(), selected.end(), *idx) != selected.end();
      Json grades = Json::object();
      for (std::size_t s = 0; s < params.lexicon.size(); ++s)
        grades[params.lexicon.symbol(s).name] = truth.grades(static_cast<Eigen::Index>(*idx), static_cast<Eigen::Index>(s));
      Json sel = Json::array();
      for (auto i : selected) sel.push_back(env.objects[i].id);
      if (io.g.json) {
        io.out << Json{{"object_id", obj},
                       {"description", render_description(last, params.lexicon)},
                       {"oracle_selected", chosen},
                       {"oracle_selection", sel},
                       {"grades", grades}}
                      .dump()
               << '\n';
      } else {
        io.out << obj << ": oracle " << (chosen ? "selects" : "rejects") << " it for '" << join_description(last, params.lexicon)
               << "' (selection:";
        for (auto i : selected) io.out << ' ' << env.objects[i].id;
        io.out << ")\n";
        for (std::size_t s = 0; s < params.lexicon.size(); ++s) {
          char buf[64];
          std::snprintf(buf, sizeof buf, "  %-7s %.3f\n", params.lexicon.symbol(s).name.c_str(),
                        truth.grades(static_cast<Eigen::Index>(*idx), static_cast<Eigen::Index>(s)));
          io.out << buf;
        }
      }
      continue;
    }

    try {
      last = parse_description(text, params.lexicon);
    } catch (const Error& e) {
      io.err << "error: " << e.what() << '\n';
      continue;
    }
    const Identification id = identify(params, env, last);
    if (io.g.json)
      io.out << identification_to_json(id).dump() << '\n';
    else
      io.out << format_identification(id);
  }
  return kOk;
}

struct RenderArgs {
  std::string corpus, env, desc, model, out;
  int width = 640, height = 480;
};

/// Scene raster; with a description each block's brightness follows its
/// posterior (relative to the most probable block) over a dimmed scene.
inline int cmd_render(const RenderArgs& a, const Io& io) {
  if (!a.desc.empty() && a.model.empty()) throw Error(Errc::schema_error, "--desc requires --model");
  if (a.width < 1 || a.height < 1) throw Error(Errc::schema_error, "raster size must be positive");
  std::optional<ModelFile> model;
  if (!a.model.empty()) model = load_model(a.model);
  const Lexicon lex = model ? model->params.lexicon : default_lexicon();
  const Corpus corpus = load_corpus(a.corpus, lex);
  Environment env = corpus.env(a.env);

  for (auto& o : env.objects)
    if (!o.block)
      o.block = SceneBlock{o.raw.x_pos, o.raw.y_pos, o.raw.width, o.raw.height,
                           hsl_to_rgb(o.raw.hue, o.raw.achromatic ? 0.0 : synth::kChromaticSaturation, o.raw.light)};

  std::array<std::uint8_t, 3> background{30, 30, 30};
  Json summary = {{"out", a.out}, {"env", env.id}};
  if (model) {
    const Description desc = parse_description(a.desc, lex);
    const Eigen::VectorXd q = posterior(desc, env, model->params);
    const double qmax = q.maxCoeff();
    constexpr double kDim = 0.15;
    for (std::size_t i = 0; i < env.size(); ++i) {
      const double level = kDim + (1.0 - kDim) * q(static_cast<Eigen::Index>(i)) / qmax;
      for (auto& c : env.objects[i].block->rgb) c = static_cast<std::uint8_t>(std::lround(c * level));
    }
    for (auto& c : background) c = static_cast<std::uint8_t>(std::lround(c * kDim));
    summary["posterior"] = identification_to_json(identify(model->params, env, desc))["posterior"];
  }
  const auto [img, mask] = synth::rasterize(env, a.width, a.height, background);
  write_ppm(std::filesystem::path(a.out), img);
  if (io.g.json) io.out << summary.dump() << '\n';
  else io.note("wrote " + a.out);
  return kOk;
}

struct GraspArgs {
  std::string points;
};

inline int cmd_grasp(const GraspArgs& a, const Io& io) {
  grasp::PointCloud cloud;
  if (a.points == "-") {
    cloud = grasp::read_cloud(io.in);
  } else {
    std::ifstream f(a.points);
    if (!f) throw Error(Errc::io_error, "cannot open " + a.points);
    cloud = grasp::read_cloud(f);
  }
  const grasp::GraspPose pose = grasp::grasp_pose(cloud);
  io.out << Json{{"position", {pose.position.x(), pose.position.y(), pose.position.z()}},
                 {"direction", {pose.direction.x(), pose.direction.y()}},
                 {"width", pose.width}}
                .dump()
         << '\n';
  return kOk;
}

struct ServeArgs {
  std::string model, corpus, static_dir;
  std::string host = "127.0.0.1";
  int port = 8080;
};

inline int cmd_serve(const ServeArgs& a, const Io& io) {
  auto m = detail::load_both(a.model, a.corpus);
  const service::ApiState state(std::move(m.model.params), std::move(m.corpus));
  httplib::Server server;
  service::install_routes(server, state, a.static_dir);
  if (!server.bind_to_port(a.host, a.port)) throw Error(Errc::io_error, "cannot bind " + a.host + ":" + std::to_string(a.port));
  io.note("serving on http://" + a.host + ":" + std::to_string(a.port));
  if (!server.listen_after_bind()) throw Error(Errc::io_error, "server stopped unexpectedly");
  return kOk;
}

// ---------------------------------------------------------------------------

inline int run(int argc, const char* const* argv, std::istream& in, std::ostream& out, std::ostream& err) {
  Globals g;
  CLI::App app{"Referring-expression identification: synthesize, train, evaluate and serve"};
  app.require_subcommand(1);
  app.add_option("--seed", g.seed, "random seed")->check(CLI::NonNegativeNumber);
  app.add_flag("--quiet", g.quiet, "no informational output on stderr");
  app.add_flag("--json", g.json, "machine-readable output");

  const std::vector<std::string> methods{"bfgs", "newton"};

  SynthArgs sa;
  auto* synth_cmd = app.add_subcommand("synth", "generate a synthetic corpus");
  synth_cmd->add_option("--out", sa.out, "corpus file (default: stdout)");
  synth_cmd->add_option("--envs", sa.envs, "environments per category, 5 comma-separated counts");
  synth_cmd->add_option("--replicas", sa.replicas, "identifications per description")->check(CLI::PositiveNumber);
  synth_cmd->add_option("--descriptions", sa.descriptions, "descriptions per object")->check(CLI::PositiveNumber);
  synth_cmd->add_option("--noise", sa.noise, "identifier grade noise (std dev)")->check(CLI::NonNegativeNumber);
  synth_cmd->add_option("--rasters", sa.rasters, "also write PPM scenes and PGM masks here");

  TrainArgs ta;
  auto* train_cmd = app.add_subcommand("train", "fit a model on a corpus");
  train_cmd->add_option("--corpus", ta.corpus)->required();
  train_cmd->add_option("--out", ta.out)->required();
  train_cmd->add_option("--method", ta.method)->check(CLI::IsMember(methods));
  train_cmd->add_option("--ridge", ta.ridge)->check(CLI::NonNegativeNumber);
  train_cmd->add_option("--tol", ta.tol, "gradient tolerance (inf-norm)")->check(CLI::PositiveNumber);
  train_cmd->add_option("--max-iters", ta.max_iters)->check(CLI::PositiveNumber);
  train_cmd->add_option("--init", ta.init)->check(CLI::IsMember({"zeros", "gaussian"}));

  EvalArgs ea;
  auto* eval_cmd = app.add_subcommand("eval", "evaluate a model on a corpus");
  eval_cmd->add_option("--corpus", ea.corpus)->required();
  eval_cmd->add_option("--model", ea.model)->required();
  eval_cmd->add_option("--filter", ea.filter, "env=ID or cat=ID");

  CvArgs ca;
  auto* cv_cmd = app.add_subcommand("cv", "cross-validate");
  cv_cmd->add_option("--corpus", ca.corpus)->required();
  cv_cmd->add_option("--mode", ca.mode)->check(CLI::IsMember({"env", "cat"}));
  cv_cmd->add_option("--method", ca.method)->check(CLI::IsMember(methods));
  cv_cmd->add_option("--ridge", ca.ridge)->check(CLI::NonNegativeNumber);
  cv_cmd->add_option("--tol", ca.tol)->check(CLI::PositiveNumber);
  cv_cmd->add_option("--workers", ca.workers, "parallel folds (0: all cores)");

  IdentifyArgs ia;
  auto* identify_cmd = app.add_subcommand("identify", "interactive identification");
  identify_cmd->add_option("--model", ia.model)->required();
  identify_cmd->add_option("--corpus", ia.corpus)->required();
  identify_cmd->add_option("--env", ia.env)->required();

  RenderArgs ra;
  auto* render_cmd = app.add_subcommand("render", "render a scene, optionally with a posterior overlay");
  render_cmd->add_option("--corpus", ra.corpus)->required();
  render_cmd->add_option("--env", ra.env)->required();
  render_cmd->add_option("--desc", ra.desc);
  render_cmd->add_option("--model", ra.model);
  render_cmd->add_option("--out", ra.out)->required();
  render_cmd->add_option("--width", ra.width);
  render_cmd->add_option("--height", ra.height);

  GraspArgs ga;
  auto* grasp_cmd = app.add_subcommand("grasp", "grasp pose of a point cloud");
  grasp_cmd->add_option("--points", ga.points, "x y z per line ('-' for stdin)")->required();

  ServeArgs va;
  auto* serve_cmd = app.add_subcommand("serve", "HTTP API");
  serve_cmd->add_option("--model", va.model)->required();
  serve_cmd->add_option("--corpus", va.corpus)->required();
  serve_cmd->add_option("--port", va.port)->check(CLI::Range(0, 65535));
  serve_cmd->add_option("--host", va.host);
  serve_cmd->add_option("--static", va.static_dir, "directory served under /");

  for (auto* sub : app.get_subcommands({})) sub->fallthrough();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kOk : kValidation;
  }

  const Io io{in, out, err, g};
  try {
    if (*synth_cmd) return cmd_synth(sa, io);
    if (*train_cmd) return cmd_train(ta, io);
    if (*eval_cmd) return cmd_eval(ea, io);
    if (*cv_cmd) return cmd_cv(ca, io);
    if (*identify_cmd) return cmd_identify(ia, io);
    if (*render_cmd) return cmd_render(ra, io);
    if (*grasp_cmd) return cmd_grasp(ga, io);
    if (*serve_cmd) return cmd_serve(va, io);
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    return is_validation(e.code()) ? kValidation : kRuntime;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kRuntime;
  }
  return kValidation;
}

/// Convenience for tests: arguments without the program name.
inline int run(const std::vector<std::string>& args, std::istream& in, std::ostream& out, std::ostream& err) {
  std::vector<const char*> argv{"refid"};
  for (const auto& a : args) argv.push_back(a.c_str());
  return run(static_cast<int>(argv.size()), argv.data(), in, out, err);
}

}  // namespace refid::cli
