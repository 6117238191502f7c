// hdsl command-line tool: train, eval, synth, project.

#include <CLI11.hpp>

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <string>

#include <nlohmann/json.hpp>

#include "hdsl/constraint_gen.hpp"
#include "hdsl/evaluation.hpp"
#include "hdsl/fw_solver.hpp"
#include "hdsl/io_error.hpp"
#include "hdsl/synthetic.hpp"

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;
using namespace hdsl;

namespace {

constexpr int kExitFlags = 2;
constexpr int kExitIo = 3;
constexpr int kExitSolver = 4;

struct SolverFlags {
  double lambda = 1.0;
  std::size_t iters = 1000;
  std::string oracle = "exact";
  std::size_t batch = 0;
  double ls_tol = 1e-6;
  double gap_tol = 1e-5;
  std::uint64_t seed = 0;
  std::size_t patience = 0;
  std::size_t eval_every = 50;
  bool deterministic = false;

  void add_to(CLI::App* cmd) {
    cmd->add_option("--lambda", lambda, "scale of the basis domain")->check(CLI::PositiveNumber);
    cmd->add_option("--iters", iters, "maximum iterations");
    cmd->add_option("--oracle", oracle, "forward oracle")
        ->check(CLI::IsMember({"exact", "minibatch", "heuristic"}));
    cmd->add_option("--batch", batch, "mini-batch size M (0 = all constraints)");
    cmd->add_option("--ls-tol", ls_tol, "line-search tolerance")->check(CLI::PositiveNumber);
    cmd->add_option("--gap-tol", gap_tol, "duality-gap stopping tolerance (exact oracle)");
    cmd->add_option("--seed", seed, "random seed");
    cmd->add_option("--patience", patience, "evaluations without improvement before stopping (0 = off)");
    cmd->add_option("--eval-every", eval_every, "validation interval")->check(CLI::PositiveNumber);
    cmd->add_flag("--deterministic", deterministic, "bit-reproducible reductions");
  }

  SolverConfig config() const {
    SolverConfig cfg;
    cfg.lambda = lambda;
    cfg.max_iters = iters;
    cfg.oracle = parse_oracle(oracle);
    cfg.batch_size = batch;
    cfg.line_search_tol = ls_tol;
    cfg.gap_tol = gap_tol;
    cfg.seed = seed;
    cfg.patience = patience;
    cfg.deterministic = deterministic;
    return cfg;
  }
};

std::size_t thread_count(std::size_t flag) {
  if (flag > 0) return flag;
  if (const char* env = std::getenv("HDSL_THREADS")) {
    try {
      const long v = std::stol(env);
      if (v > 0) return static_cast<std::size_t>(v);
    } catch (const std::exception&) {
    }
    throw CLI::ValidationError("HDSL_THREADS", std::string("must be a positive integer, got '") + env + "'");
  }
  return 1;
}

// Loads a pair of datasets into a common dimension.
void load_pair(const std::string& a_path, const std::string& b_path, std::optional<std::size_t> dim,
               Dataset& a, Dataset& b) {
  a = load_libsvm(a_path, dim);
  b = load_libsvm(b_path, dim);
  const std::size_t d = std::max(a.dim, b.dim);
  for (Dataset* ds : {&a, &b}) {
    ds->dim = d;
    for (auto& x : ds->points) x.set_dim(d);
  }
}

void write_text(const std::string& path, const std::function<void(std::ostream&)>& body) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path);
  body(out);
  if (!out) throw IoError("write failure on " + path);
}

json model_summary(const Model& m) {
  return {{"atoms", m.atom_count()}, {"features", m.feature_count()}, {"nnz", to_sparse_matrix(m).size()}};
}

// ---- train ------------------------------------------------------------------

struct TrainCmd {
  std::string data, valid, constraints = "neighbors", triplets, out = "model.hdsl", history;
  std::optional<std::size_t> dim;
  std::size_t targets = 3, impostors = 5, per_instance = 10, k = 3, threads = 0;
  bool scale = false;
  SolverFlags solver;

  void add(CLI::App& app) {
    auto* cmd = app.add_subcommand("train", "learn a sparse similarity from triplet constraints");
    cmd->add_option("--data", data, "training data (LIBSVM)")->required();
    cmd->add_option("--valid", valid, "validation data for early stopping on k-NN error");
    cmd->add_option("--dim", dim, "ambient dimension (default: largest index seen)");
    cmd->add_option("--constraints", constraints, "constraint source")
        ->check(CLI::IsMember({"neighbors", "random-label", "file"}));
    cmd->add_option("--triplets", triplets, "triplet file for --constraints file");
    cmd->add_option("--targets", targets, "same-label neighbors per point");
    cmd->add_option("--impostors", impostors, "different-label neighbors per point");
    cmd->add_option("--per-instance", per_instance, "random-label triplets per point");
    cmd->add_option("--k", k, "neighbors for validation k-NN")->check(CLI::PositiveNumber);
    cmd->add_flag("--scale", scale, "scale features by training max-abs");
    cmd->add_option("--threads", threads, "worker cap (fallback: HDSL_THREADS)");
    cmd->add_option("--out", out, "model output path");
    cmd->add_option("--history", history, "JSONL history path (default: <out>.jsonl)");
    solver.add_to(cmd);
    cmd->callback([this] { run(); });
  }

  void run() {
    if (constraints == "file" && triplets.empty()) throw CLI::ValidationError("--triplets", "required with --constraints file");
    const std::size_t workers = thread_count(threads);
    Dataset train_ds, valid_ds;
    if (valid.empty()) {
      train_ds = load_libsvm(data, dim);
    } else {
      load_pair(data, valid, dim, train_ds, valid_ds);
    }
    if (scale) {
      const auto s = FeatureScaling::fit(train_ds);
      train_ds = s.apply(train_ds);
      if (!valid.empty()) valid_ds = s.apply(valid_ds);
    }
    auto shared = std::make_shared<const Dataset>(std::move(train_ds));

    Rng rng(solver.seed);
    std::vector<TripletConstraint> trips;
    if (constraints == "file") {
      trips = load_triplets(triplets);
    } else if (constraints == "neighbors") {
      trips = neighbors_triplets(*shared, targets, impostors).triplets;
    } else {
      trips = random_label_triplets(*shared, per_instance, rng).triplets;
    }
    const ConstraintSet cs(shared, std::move(trips));

    SolverConfig cfg = solver.config();
    if (!valid.empty()) {
      cfg.validation = ValidationHook{
          [&](const Model& m) { return knn_error(m, *shared, valid_ds, k, workers); }, true, solver.eval_every};
    }
    const TrainResult res = train(cs, cfg);
    save_model(res.model, out);
    write_text(history.empty() ? out + ".jsonl" : history,
               [&](std::ostream& o) { write_history_jsonl(res.history, o); });

    json summary{{"model", out},
                 {"constraints", cs.size()},
                 {"iterations", res.history.size() - 1},
                 {"stop_reason", to_string(res.reason)},
                 {"best_iteration", res.best_iteration},
                 {"objective", res.history.back().objective}};
    if (res.best_val_metric) summary["val_knn_error"] = *res.best_val_metric;
    summary.update(model_summary(res.model));
    std::cout << summary.dump() << '\n';
  }
};

// ---- eval -------------------------------------------------------------------

struct EvalCmd {
  std::string model, train_path, test_path;
  std::optional<std::size_t> dim;
  std::size_t k = 3, threads = 0;
  bool scale = false;

  void add(CLI::App& app) {
    auto* cmd = app.add_subcommand("eval", "k-NN error and sparsity of a model");
    cmd->add_option("--model", model, "model file")->required();
    cmd->add_option("--train", train_path, "reference points (LIBSVM)")->required();
    cmd->add_option("--test", test_path, "query points (LIBSVM)")->required();
    cmd->add_option("--dim", dim, "ambient dimension");
    cmd->add_option("--k", k, "neighbors")->check(CLI::PositiveNumber);
    cmd->add_flag("--scale", scale, "scale features by training max-abs");
    cmd->add_option("--threads", threads, "worker cap (fallback: HDSL_THREADS)");
    cmd->callback([this] { run(); });
  }

  void run() {
    const std::size_t workers = thread_count(threads);
    const Model m = load_model(model);
    Dataset tr, te;
    load_pair(train_path, test_path, dim ? dim : std::optional<std::size_t>(m.dim()), tr, te);
    if (scale) {
      const auto s = FeatureScaling::fit(tr);
      tr = s.apply(tr);
      te = s.apply(te);
    }
    json j{{"knn_error", knn_error(m, tr, te, k, workers)}, {"k", k}};
    j.update(model_summary(m));
    std::cout << j.dump() << '\n';
  }
};

// ---- project ----------------------------------------------------------------

struct ProjectCmd {
  std::string model, data, out, scale_from;

  void add(CLI::App& app) {
    auto* cmd = app.add_subcommand("project", "map points into the model's low-dimensional space");
    cmd->add_option("--model", model, "model file")->required();
    cmd->add_option("--data", data, "points to project (LIBSVM)")->required();
    cmd->add_option("--out", out, "output path (LIBSVM, dense rows)")->required();
    cmd->add_option("--scale-from", scale_from, "fit max-abs scaling on this training file first");
    cmd->callback([this] { run(); });
  }

  void run() {
    const Model m = load_model(model);
    Dataset ds = load_libsvm(data, m.dim());
    if (!scale_from.empty()) ds = FeatureScaling::fit(load_libsvm(scale_from, m.dim())).apply(ds);
    const ProjectionMap p = factorize(m);
    write_text(out, [&](std::ostream& o) {
      char buf[64];
      for (std::size_t r = 0; r < ds.size(); ++r) {
        o << (ds.labels ? (*ds.labels)[r] : 0);
        const auto z = project(p, ds.points[r]);
        for (std::size_t c = 0; c < z.size(); ++c) {
          std::snprintf(buf, sizeof buf, " %zu:%.17g", c + 1, z[c]);
          o << buf;
        }
        o << '\n';
      }
    });
    std::cout << json{{"points", ds.size()}, {"dim", p.columns.size()}, {"out", out}}.dump() << '\n';
  }
};

// ---- synth ------------------------------------------------------------------

void prepare_dir(const std::string& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create directory " + dir + ": " + ec.message());
}

struct SynthRecoveryCmd {
  std::size_t d = 2000, bases = 100, n = 5000, triplets = 30000;
  double alpha = 0.1, sparsity = 0.02, dirichlet = 9.0;
  std::uint64_t seed = 0;
  std::string out_dir = "recovery";
  bool run_training = false;
  SolverFlags solver;

  void add(CLI::App* synth) {
    auto* cmd = synth->add_subcommand("recovery", "planted-truth recovery experiment");
    cmd->add_option("--d", d, "dimension");
    cmd->add_option("--bases", bases, "bases in the planted truth");
    cmd->add_option("--alpha", alpha, "fraction of nearest/farthest points used for triplets")
        ->check(CLI::Range(0.0, 0.5));
    cmd->add_option("--n", n, "samples");
    cmd->add_option("--triplets", triplets, "triplet count");
    cmd->add_option("--sparsity", sparsity, "fraction of nonzero features per sample");
    cmd->add_option("--dirichlet", dirichlet, "symmetric Dirichlet concentration of the truth weights");
    cmd->add_option("--out-dir", out_dir, "output directory");
    cmd->add_flag("--run", run_training, "train and report recovery AUCs");
    solver.lambda = 100.0;
    solver.oracle = "heuristic";
    solver.iters = 1000;
    solver.eval_every = 1;
    solver.add_to(cmd);
    cmd->remove_option(cmd->get_option("--seed"));
    cmd->add_option("--seed", seed, "random seed (data and solver)");
    cmd->callback([this] { run(); });
  }

  void run() {
    prepare_dir(out_dir);
    Rng rng(seed);
    const Model truth = gen_truth(d, bases, std::nullopt, dirichlet, rng);
    auto samples = std::make_shared<const Dataset>(gen_uniform_sparse(n, d, sparsity, rng));
    auto gen = truth_triplets(*samples, truth, alpha, triplets, rng);
    save_model(truth, out_dir + "/truth.hdsl");
    save_libsvm(*samples, out_dir + "/samples.svm");
    save_triplets(gen.triplets, out_dir + "/triplets.txt");
    json summary{{"out_dir", out_dir}, {"samples", samples->size()}, {"triplets", gen.triplets.size()}};
    if (run_training) {
      const ConstraintSet cs(samples, std::move(gen.triplets));
      const auto tf = active_features(truth);
      const auto te = active_entries(truth);
      SolverConfig cfg = solver.config();
      cfg.seed = seed;
      std::ofstream metrics(out_dir + "/metrics.jsonl");
      if (!metrics) throw IoError("cannot write " + out_dir + "/metrics.jsonl");
      cfg.observer = [&](const IterationRecord& r, const Model& m) {
        if (r.k % solver.eval_every != 0) return;
        metrics << json{{"k", r.k},
                        {"objective", r.objective},
                        {"feature_auc", feature_recovery_auc(m, tf)},
                        {"entry_auc", entry_recovery_auc(m, te)}}
                       .dump()
                << '\n';
      };
      const TrainResult res = train(cs, cfg);
      save_model(res.model, out_dir + "/model.hdsl");
      write_text(out_dir + "/history.jsonl", [&](std::ostream& o) { write_history_jsonl(res.history, o); });
      summary["iterations"] = res.history.size() - 1;
      summary["feature_auc"] = feature_recovery_auc(res.model, tf);
      summary["entry_auc"] = entry_recovery_auc(res.model, te);
      summary.update(model_summary(res.model));
    }
    std::cout << summary.dump() << '\n';
  }
};

struct SynthLinkCmd {
  std::size_t d = 50000, n = 500, links = 1000, per_link = 4, bases = 100;
  double exponent = 0.5, min_freq = 0.1, top_frac = 0.05, dirichlet = 9.0;
  std::optional<double> sparsity;
  std::uint64_t seed = 0;
  std::string out_dir = "link";
  bool run_training = false;
  SolverFlags solver;

  void add(CLI::App* synth) {
    auto* cmd = synth->add_subcommand("link", "planted-truth link prediction experiment");
    cmd->add_option("--d", d, "dimension");
    cmd->add_option("--n", n, "samples");
    cmd->add_option("--links", links, "links per split (train, validation, test)");
    cmd->add_option("--per-link", per_link, "triplets per training link");
    cmd->add_option("--bases", bases, "bases in the planted truth");
    cmd->add_option("--exponent", exponent, "power-law exponent of feature frequencies");
    cmd->add_option("--sparsity", sparsity, "mean fraction of nonzeros (default: dimension schedule)");
    cmd->add_option("--min-freq", min_freq, "minimum frequency of truth features");
    cmd->add_option("--top-frac", top_frac, "rank fraction defining positive/negative links");
    cmd->add_option("--dirichlet", dirichlet, "symmetric Dirichlet concentration of the truth weights");
    cmd->add_option("--out-dir", out_dir, "output directory");
    cmd->add_flag("--run", run_training, "train with validation early stopping and report link AUC");
    solver.lambda = 100.0;
    solver.oracle = "heuristic";
    solver.iters = 2000;
    solver.eval_every = 20;
    solver.patience = 10;
    solver.add_to(cmd);
    cmd->remove_option(cmd->get_option("--seed"));
    cmd->add_option("--seed", seed, "random seed (data and solver)");
    cmd->callback([this] { run(); });
  }

  void run() {
    prepare_dir(out_dir);
    Rng rng(seed);
    auto samples = std::make_shared<const Dataset>(
        gen_powerlaw_sparse(n, d, sparsity.value_or(link_sparsity_schedule(d)), exponent, rng));
    const Model truth = gen_truth_frequent(d, bases, *samples, min_freq, dirichlet, rng);
    const auto all = gen_links(*samples, truth, top_frac, 3 * links, rng);
    const std::vector<SignedLink> tr(all.begin(), all.begin() + static_cast<std::ptrdiff_t>(links));
    const std::vector<SignedLink> va(all.begin() + static_cast<std::ptrdiff_t>(links),
                                     all.begin() + static_cast<std::ptrdiff_t>(2 * links));
    const std::vector<SignedLink> te(all.begin() + static_cast<std::ptrdiff_t>(2 * links), all.end());
    auto gen = link_triplets(samples->size(), tr, per_link, rng);
    save_model(truth, out_dir + "/truth.hdsl");
    save_libsvm(*samples, out_dir + "/samples.svm");
    save_links(tr, out_dir + "/links_train.txt");
    save_links(va, out_dir + "/links_valid.txt");
    save_links(te, out_dir + "/links_test.txt");
    save_triplets(gen.triplets, out_dir + "/triplets.txt");
    json summary{{"out_dir", out_dir}, {"samples", samples->size()}, {"triplets", gen.triplets.size()}};
    if (run_training) {
      const ConstraintSet cs(samples, std::move(gen.triplets));
      SolverConfig cfg = solver.config();
      cfg.seed = seed;
      cfg.validation = ValidationHook{[&](const Model& m) { return link_auc(m, *samples, va); }, false,
                                      solver.eval_every};
      std::ofstream metrics(out_dir + "/metrics.jsonl");
      if (!metrics) throw IoError("cannot write " + out_dir + "/metrics.jsonl");
      cfg.observer = [&](const IterationRecord& r, const Model&) {
        if (r.val_metric) metrics << json{{"k", r.k}, {"objective", r.objective}, {"val_auc", *r.val_metric}}.dump() << '\n';
      };
      const TrainResult res = train(cs, cfg);
      save_model(res.model, out_dir + "/model.hdsl");
      write_text(out_dir + "/history.jsonl", [&](std::ostream& o) { write_history_jsonl(res.history, o); });
      summary["iterations"] = res.history.size() - 1;
      summary["best_iteration"] = res.best_iteration;
      summary["val_auc"] = *res.best_val_metric;
      summary["test_auc"] = link_auc(res.model, *samples, te);
      summary.update(model_summary(res.model));
    }
    std::cout << summary.dump() << '\n';
  }
};

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"sparse high-dimensional similarity learning"};
  app.require_subcommand(1);
  TrainCmd train_cmd;
  EvalCmd eval_cmd;
  ProjectCmd project_cmd;
  SynthRecoveryCmd recovery_cmd;
  SynthLinkCmd link_cmd;
  train_cmd.add(app);
  eval_cmd.add(app);
  project_cmd.add(app);
  auto* synth = app.add_subcommand("synth", "synthetic experiments");
  synth->require_subcommand(1);
  recovery_cmd.add(synth);
  link_cmd.add(synth);

  try {
    app.parse(argc, argv);
  } catch (const CLI::Success& e) {
    return app.exit(e);
  } catch (const CLI::Error& e) {
    app.exit(e);
    return kExitFlags;
  } catch (const IoError& e) {
    std::cerr << "hdsl: " << e.what() << '\n';
    return kExitIo;
  } catch (const ParseError& e) {
    std::cerr << "hdsl: " << e.what() << '\n';
    return kExitIo;
  } catch (const ModelError& e) {
    std::cerr << "hdsl: " << e.what() << '\n';
    return kExitIo;
  } catch (const std::invalid_argument& e) {  // SolverError, DimensionMismatch, bad constraints
    std::cerr << "hdsl: " << e.what() << '\n';
    return kExitSolver;
  } catch (const std::domain_error& e) {
    std::cerr << "hdsl: " << e.what() << '\n';
    return kExitSolver;
  } catch (const std::exception& e) {
    std::cerr << "hdsl: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
