// hmips: command-line front end.
//
//   hmips gen          synthetic hybrid dataset (+ query set)
//   hmips prep-ratings "user item rating" triplets -> hybrid dataset via SVD
//   hmips build        dataset -> composite index file
//   hmips search       index + queries -> "id,score" lines
//   hmips bench        recall / latency table over the baseline roster
//   hmips verify       Monte-Carlo bound suites
//   hmips cost         per-dimension cache-line model vs measurement (CSV)
//
// Every subcommand accepts --config FILE with key=value lines ([subcommand]
// sections or subcommand.key=value); flags on the command line win.
//
// Exit codes: 0 ok, 1 internal, 2 usage, 3 io, 4 file format, 5 schema mismatch.

#include <cstdio>
#include <fstream>
#include <iostream>
#include <numeric>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>

#include "hmips/hmips.hpp"

namespace {

using namespace hmips;

enum Exit : int { ok = 0, internal = 1, usage = 2, io = 3, format = 4, schema = 5 };

int exit_code(Errc c) {
  switch (c) {
    case Errc::invalid_argument:
    case Errc::out_of_range:
    case Errc::unsupported: return usage;
    case Errc::io: return io;
    case Errc::bad_magic:
    case Errc::truncated:
    case Errc::version_mismatch: return format;
    case Errc::dimension_mismatch: return schema;
    case Errc::numerical: return internal;
  }
  return internal;
}

unsigned default_threads() { return std::max(1u, std::thread::hardware_concurrency()); }

void write_text(const std::string& path, const std::string& text) {
  if (path.empty() || path == "-") {
    std::cout << text;
    return;
  }
  std::ofstream out(path, std::ios::binary);
  require(static_cast<bool>(out), Errc::io, "cannot open " + path + " for writing");
  out << text;
  require(static_cast<bool>(out), Errc::io, "write failed: " + path);
}

struct SynthFlags {
  SynthConfig cfg;
  std::string value_law = "uniform";

  void add(CLI::App* app) {
    app->add_option("--n", cfg.n, "datapoints")->capture_default_str();
    app->add_option("--queries", cfg.n_queries, "query vectors")->capture_default_str();
    app->add_option("--d-sparse", cfg.d_sparse, "sparse dimensionality")->capture_default_str();
    app->add_option("--d-dense", cfg.d_dense, "dense dimensionality")->capture_default_str();
    app->add_option("--zipf-alpha", cfg.zipf_alpha, "power-law exponent of dim activity")->capture_default_str();
    app->add_option("--nnz-scale", cfg.nnz_scale, "activity multiplier")->capture_default_str();
    app->add_option("--value-law", value_law, "uniform|power")->check(CLI::IsMember({"uniform", "power"}))
        ->capture_default_str();
    app->add_option("--value-max", cfg.value_max, "sparse value bound M")->capture_default_str();
    app->add_option("--value-power", cfg.value_power, "exponent for --value-law power")->capture_default_str();
    app->add_option("--dense-scale", cfg.dense_scale, "dense standard deviation")->capture_default_str();
    app->add_option("--seed", cfg.seed, "generator seed")->capture_default_str();
  }

  SynthConfig resolve() {
    cfg.value_law = value_law == "power" ? ValueLaw::power : ValueLaw::uniform;
    cfg.validate();
    return cfg;
  }
};

struct IndexFlags {
  HybridIndexConfig cfg;
  std::optional<float> eta;
  bool no_whiten = false, no_cache_sort = false;

  void add(CLI::App* app, bool with_search_params) {
    if (with_search_params) {
      app->add_option("--alpha", cfg.alpha, "stage-1 overfetch factor")->capture_default_str();
      app->add_option("--beta", cfg.beta, "stage-2 retain factor")->capture_default_str();
      app->add_flag("--exact-rerank", cfg.exact_final_rerank, "score stage-3 survivors exactly");
    }
    app->add_option("--top-t", cfg.top_t, "postings kept per dim in the data index")->capture_default_str();
    app->add_option("--eta", eta, "uniform data-index threshold (overrides --top-t)");
    app->add_option("--epsilon", cfg.epsilon, "residual threshold")->capture_default_str();
    app->add_option("--dense-subspaces", cfg.dense_subspaces, "PQ subspaces (0: ceil(dD/2))")->capture_default_str();
    app->add_option("--kmeans-iters", cfg.kmeans_iters, "Lloyd iterations")->capture_default_str();
    app->add_option("--train-rows", cfg.train_rows, "training sample rows (0: all)")->capture_default_str();
    app->add_flag("--no-whiten", no_whiten, "skip dense whitening");
    app->add_flag("--no-cache-sort", no_cache_sort, "keep original datapoint order");
    app->add_option("--sparse-weight", cfg.sparse_weight, "query sparse weight")->capture_default_str();
    app->add_option("--dense-weight", cfg.dense_weight, "query dense weight")->capture_default_str();
    app->add_option("--index-seed", cfg.seed, "training seed")->capture_default_str();
  }

  HybridIndexConfig resolve() {
    cfg.eta = eta;
    cfg.whiten = !no_whiten;
    cfg.cache_sort = !no_cache_sort;
    cfg.validate();
    return cfg;
  }
};

// ---------------------------------------------------------------------------

int run_gen(SynthFlags& f, const std::string& out, const std::string& queries_out) {
  const auto cfg = f.resolve();
  require(!out.empty(), Errc::invalid_argument, "--out is required");
  require(cfg.n_queries == 0 || !queries_out.empty(), Errc::invalid_argument,
          "--queries-out is required when --queries > 0");
  const auto s = generate_synthetic(cfg);
  save_dataset(out, s.data);
  if (cfg.n_queries > 0) save_dataset(queries_out, s.queries);
  std::cerr << "wrote " << s.data.size() << " points to " << out;
  if (cfg.n_queries > 0) std::cerr << ", " << s.queries.size() << " queries to " << queries_out;
  std::cerr << '\n';
  return ok;
}

struct PrepFlags {
  std::string ratings, out, queries_out;
  std::uint32_t rank = 300;
  std::optional<double> lambda;
  std::uint64_t queries = 0;
  std::uint64_t seed = 0;
  float min_rating = 1.0f, max_rating = 5.0f;
};

int run_prep(const PrepFlags& f) {
  require(f.min_rating <= f.max_rating, Errc::invalid_argument, "--min-rating exceeds --max-rating");
  require(f.queries == 0 || !f.queries_out.empty(), Errc::invalid_argument,
          "--queries-out is required when --queries > 0");
  const auto r = load_ratings(f.ratings, f.min_rating, f.max_rating);
  SvdOptions opt;
  opt.seed = f.seed;
  const auto emb = svd_embed(r, f.rank, f.lambda, opt);
  std::cerr << "users=" << r.users << " items=" << r.items << " ratings=" << r.triplets.size()
            << " rank=" << f.rank << " lambda=" << emb.lambda << '\n';
  if (f.queries == 0) {
    save_dataset(f.out, emb.data);
    return ok;
  }
  const auto split = split_queries(emb.data, f.queries, f.seed);
  save_dataset(f.out, split.data);
  save_dataset(f.queries_out, split.queries);
  return ok;
}

int run_build(IndexFlags& f, const std::string& data_path, const std::string& out, bool no_data) {
  const auto cfg = f.resolve();
  auto data = std::make_shared<const HybridDataset>(load_dataset(data_path));
  const auto idx = build_index(data, cfg);
  save_index(out, idx, !no_data);
  std::cerr << "indexed " << idx.n << " points (" << idx.sparse_data.nnz() << " data postings, "
            << idx.sparse_residual.nnz() << " residual entries, " << idx.dense.codebooks.subspaces()
            << " PQ subspaces) -> " << out << '\n';
  return ok;
}

struct SearchFlags {
  std::string index, queries;
  std::optional<std::uint64_t> query_index;
  std::uint32_t h = 20;
  std::optional<double> alpha, beta;
  bool exact = false;
  unsigned threads = 1;
};

int run_search(const SearchFlags& f) {
  require(f.h >= 1, Errc::invalid_argument, "--h must be >= 1");
  if (f.alpha || f.beta) {
    const double a = f.alpha.value_or(10.0), b = f.beta.value_or(std::min(3.0, a));
    require(b >= 1.0 && a >= b, Errc::invalid_argument, "need alpha >= beta >= 1");
  }
  const auto idx = load_index(f.index);
  const auto qs = load_dataset(f.queries);
  require(qs.d_sparse() == idx.d_sparse && qs.d_dense() == idx.d_dense, Errc::dimension_mismatch,
          "query schema (dS=" + std::to_string(qs.d_sparse()) + ", dD=" + std::to_string(qs.d_dense()) +
              ") differs from index (dS=" + std::to_string(idx.d_sparse) + ", dD=" + std::to_string(idx.d_dense) + ")");
  if (f.exact) require(idx.original != nullptr, Errc::unsupported, "--exact needs an index built with embedded data");
  SearchParams p{idx.config.alpha, idx.config.beta, idx.config.exact_final_rerank || f.exact};
  if (f.alpha) p.alpha = *f.alpha;
  if (f.beta) p.beta = *f.beta;
  p.beta = std::min(p.beta, p.alpha);
  require(p.beta >= 1.0 && p.alpha >= p.beta, Errc::invalid_argument, "need alpha >= beta >= 1");

  std::string text;
  char buf[64];
  auto emit = [&](const SearchResult& r) {
    for (std::size_t k = 0; k < r.ids.size(); ++k) {
      std::snprintf(buf, sizeof buf, "%u,%.9g\n", r.ids[k], r.scores[k]);
      text += buf;
    }
  };
  if (f.query_index) {
    require(*f.query_index < qs.size(), Errc::out_of_range, "--query-index beyond query file");
    Searcher s(idx);
    emit(s.search(qs.vector_at(*f.query_index), f.h, p));
  } else {
    const auto results = search_batch(idx, qs, f.h, p, f.threads);
    for (std::size_t i = 0; i < results.size(); ++i) {
      if (results.size() > 1) text += "# query " + std::to_string(i) + "\n";
      emit(results[i]);
    }
  }
  std::cout << text;
  return ok;
}

struct BenchFlags {
  std::string data, queries, out, name = "synthetic", format = "table";
  std::vector<std::string> methods{"hybrid", "sparse_inverted_index", "sparse_ii_no_reorder", "sparse_ii_rerank_20k",
                                   "dense_pq_rerank_10k", "hamming_512"};
  std::uint32_t h = 20, reps = 3;
  bool deterministic = false;
  unsigned threads = 1;
};

int run_bench(const BenchFlags& f, IndexFlags& ixf) {
  const auto cfg = ixf.resolve();
  require(f.reps >= 1, Errc::invalid_argument, "--reps must be >= 1");
  for (const auto& m : f.methods) (void)make_method(m, cfg);  // reject unknown names before any I/O
  auto data = std::make_shared<const HybridDataset>(load_dataset(f.data));
  const auto qs = load_dataset(f.queries);
  BenchOptions opt;
  opt.dataset = f.name;
  opt.h = f.h;
  opt.repetitions = f.reps;
  opt.deterministic = f.deterministic;
  opt.threads = f.threads;
  const auto rep = run_benchmark(data, qs, f.methods, cfg, opt);
  write_text(f.out, f.format == "csv" ? rep.to_csv() : rep.to_table());
  return ok;
}

struct VerifyFlags {
  std::string suite = "all", format = "table";
  VerifyParams prm;
};

int run_verify(VerifyFlags& f) {
  std::vector<BoundSuite> suites;
  if (f.suite == "all")
    suites = {BoundSuite::prop1, BoundSuite::prop2, BoundSuite::prop3, BoundSuite::prop4};
  else
    suites = {parse_suite(f.suite)};
  require(f.prm.trials >= 1, Errc::invalid_argument, "--trials must be >= 1");
  bool all = true;
  std::string text = f.format == "csv" ? "suite,result,bound,empirical,slack,margin\n" : "";
  for (auto s : suites) {
    const auto r = verify_bounds(s, f.prm);
    all = all && r.passed;
    if (f.format == "csv") {
      char buf[256];
      std::snprintf(buf, sizeof buf, "%s,%s,%.6g,%.6g,%.4g,%.6g\n", suite_name(s), r.passed ? "PASS" : "FAIL", r.bound,
                    r.empirical, r.slack, r.margin);
      text += buf;
    } else {
      text += r.summary() + "\n";
    }
  }
  std::cout << text;
  return all ? ok : internal;
}

struct CostFlags {
  std::string data, queries, out;
  std::uint32_t line = 16;
  bool synth = false;
};

// Fig.-4-style rows: per dim, the fraction of the N/B accumulator lines a
// query touches in expectation (unsorted model, sorted bound) and measured.
int run_cost(const CostFlags& f, SynthFlags& sf) {
  require(f.line >= 1, Errc::invalid_argument, "--line must be >= 1");
  require(f.synth != !f.data.empty(), Errc::invalid_argument, "give exactly one of --synthetic or --data");
  require(f.synth || !f.queries.empty(), Errc::invalid_argument, "--data needs --query-file");
  HybridDataset data, queries;
  std::vector<double> p, q;        // indexed by popularity rank
  std::vector<DimIndex> dim_of;    // rank -> dim
  if (f.synth) {
    auto cfg = sf.resolve();
    auto s = generate_synthetic(cfg);
    data = std::move(s.data);
    queries = std::move(s.queries);
    p = cfg.activities();
    q = cfg.query_activities();
    dim_of.resize(p.size());
    std::iota(dim_of.begin(), dim_of.end(), DimIndex{0});
  } else {
    data = load_dataset(f.data);
    queries = load_dataset(f.queries);
    require(queries.d_sparse() == data.d_sparse(), Errc::dimension_mismatch, "query d_sparse differs from data");
    const auto pc = data.sparse.nnz_per_dim(), qc = queries.sparse.nnz_per_dim();
    dim_of = rank_dimensions(data.sparse);
    for (DimIndex j : dim_of) {
      p.push_back(data.size() ? static_cast<double>(pc[j]) / static_cast<double>(data.size()) : 0.0);
      q.push_back(queries.size() ? static_cast<double>(qc[j]) / static_cast<double>(queries.size()) : 0.0);
    }
  }
  const auto n = data.size();
  const auto unsorted = build_inverted(data.sparse, Permutation::identity(n));
  const auto sorted = build_inverted(data.sparse, cache_sort(data.sparse));
  CostModelParams cm{p, q, n, f.line};
  cm.validate();
  std::vector<double> mu(data.d_sparse(), 0.0), ms(data.d_sparse(), 0.0), act(data.d_sparse(), 0.0);
  for (std::uint64_t qi = 0; qi < queries.size(); ++qi)
    for (DimIndex j : queries.sparse.row(qi).dims) {
      act[j] += 1.0;
      mu[j] += static_cast<double>(list_lines(unsorted.list_ids(j), f.line));
      ms[j] += static_cast<double>(list_lines(sorted.list_ids(j), f.line));
    }
  // Fractions of the N/B lines scanned per activation of each dim.
  const double lines = std::max(1.0, std::ceil(static_cast<double>(n) / f.line));
  std::string text = "rank,dim,P,Q,expected_unsorted,sorted_bound,measured_unsorted,measured_sorted\n";
  char buf[256];
  for (std::uint64_t r = 0; r < dim_of.size(); ++r) {
    const auto j = dim_of[r];
    const double eu = unsorted_lines_for_dim(cm, r) / lines;
    const double es = sorted_lines_bound_for_dim(cm, r) / lines;
    std::snprintf(buf, sizeof buf, "%llu,%u,%.6g,%.6g,%.6g,%.6g,%.6g,%.6g\n", static_cast<unsigned long long>(r + 1), j,
                  p[r], q[r], eu, es, act[j] > 0 ? mu[j] / act[j] / lines : 0.0, act[j] > 0 ? ms[j] / act[j] / lines : 0.0);
    text += buf;
  }
  std::snprintf(buf, sizeof buf,
                "# lines/query: expected_unsorted=%.6g sorted_bound=%.6g measured_unsorted=%.6g measured_sorted=%.6g\n",
                expected_cachelines_unsorted(cm), expected_cachelines_sorted_bound(cm),
                measure_cachelines(unsorted, queries.sparse, f.line), measure_cachelines(sorted, queries.sparse, f.line));
  text += buf;
  write_text(f.out, text);
  return ok;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Hybrid sparse+dense maximum inner product search"};
  app.set_help_flag("--help", "Print this help message and exit");
  app.require_subcommand(1);
  app.set_config("--config", "", "key=value settings file; command-line flags take precedence");

  // gen
  SynthFlags gen_synth;
  std::string gen_out, gen_qout;
  auto* gen = app.add_subcommand("gen", "Generate a synthetic hybrid dataset");
  gen_synth.add(gen);
  gen->add_option("--out", gen_out, "dataset file")->required();
  gen->add_option("--queries-out", gen_qout, "query file");

  // prep-ratings
  PrepFlags prep;
  auto* prep_cmd = app.add_subcommand("prep-ratings", "Embed rating triplets as hybrid vectors");
  prep_cmd->add_option("--ratings", prep.ratings, "text file of 'user item rating' lines")->required();
  prep_cmd->add_option("--rank", prep.rank, "SVD rank (dense dims)")->capture_default_str();
  prep_cmd->add_option("--lambda", prep.lambda, "dense weight (default: equalize mean norms)");
  prep_cmd->add_option("--queries", prep.queries, "rows sampled as queries")->capture_default_str();
  prep_cmd->add_option("--seed", prep.seed, "SVD / split seed")->capture_default_str();
  prep_cmd->add_option("--min-rating", prep.min_rating)->capture_default_str();
  prep_cmd->add_option("--max-rating", prep.max_rating)->capture_default_str();
  prep_cmd->add_option("--out", prep.out, "dataset file")->required();
  prep_cmd->add_option("--queries-out", prep.queries_out, "query file");

  // build
  IndexFlags build_ix;
  std::string build_data, build_out;
  bool build_no_data = false;
  auto* build = app.add_subcommand("build", "Build a hybrid index");
  build->add_option("--data", build_data, "dataset file")->required();
  build->add_option("--out", build_out, "index file")->required();
  build->add_flag("--no-embed-data", build_no_data, "omit the original dataset (disables exact rerank)");
  build->add_option("--h", build_ix.cfg.h, "default result count")->capture_default_str();
  build_ix.add(build, true);

  // search
  SearchFlags sf;
  sf.threads = default_threads();
  auto* search = app.add_subcommand("search", "Query an index; prints id,score lines");
  search->add_option("--index", sf.index, "index file")->required();
  search->add_option("--queries", sf.queries, "query dataset file")->required();
  search->add_option("--query-index", sf.query_index, "run only this query");
  search->add_option("--h", sf.h, "results per query")->capture_default_str();
  search->add_option("--alpha", sf.alpha, "override stage-1 overfetch");
  search->add_option("--beta", sf.beta, "override stage-2 retain");
  search->add_flag("--exact", sf.exact, "exact final rerank");
  search->add_option("--threads", sf.threads, "worker threads")->capture_default_str();

  // bench
  BenchFlags bf;
  bf.threads = default_threads();
  IndexFlags bench_ix;
  auto* bench = app.add_subcommand("bench", "Recall and latency over the method roster");
  bench->add_option("--data", bf.data, "dataset file")->required();
  bench->add_option("--queries", bf.queries, "query dataset file")->required();
  bench->add_option("--methods", bf.methods, "methods to run")->delimiter(',')
      ->check(CLI::IsMember(method_names()))->capture_default_str();
  bench->add_option("--h", bf.h, "recall@h")->capture_default_str();
  bench->add_option("--reps", bf.reps, "timing repetitions per query")->capture_default_str();
  bench->add_flag("--deterministic", bf.deterministic, "write zero for timing fields");
  bench->add_option("--dataset-name", bf.name)->capture_default_str();
  bench->add_option("--output-format", bf.format)->check(CLI::IsMember({"csv", "table"}))->capture_default_str();
  bench->add_option("--out", bf.out, "output file (default stdout)");
  bench->add_option("--threads", bf.threads, "ground-truth workers")->capture_default_str();
  bench_ix.add(bench, true);

  // verify
  VerifyFlags vf;
  vf.prm.threads = default_threads();
  auto* verify = app.add_subcommand("verify", "Monte-Carlo bound suites");
  verify->add_option("--suite", vf.suite, "prop1|prop2|prop3|prop4|all")
      ->check(CLI::IsMember({"prop1", "prop2", "prop3", "prop4", "all"}))->capture_default_str();
  verify->add_option("--trials", vf.prm.trials)->capture_default_str();
  verify->add_option("--seed", vf.prm.seed)->capture_default_str();
  verify->add_option("--threads", vf.prm.threads)->capture_default_str();
  verify->add_option("--output-format", vf.format)->check(CLI::IsMember({"csv", "table"}))->capture_default_str();
  verify->add_option("--eps", vf.prm.eps, "prop3 error tolerance")->capture_default_str();
  verify->add_option("--eta", vf.prm.eta, "prop3 pruning threshold")->capture_default_str();
  verify->add_option("--p", vf.prm.p, "prop3 activity probability")->capture_default_str();
  verify->add_option("--d-sparse", vf.prm.d_sparse, "prop3 dimensionality")->capture_default_str();
  verify->add_option("--target-bound", vf.prm.target_bound, "prop2 analytic bound the eps is solved for")
      ->capture_default_str();
  verify->add_option("--queries", vf.prm.queries, "prop4 queries")->capture_default_str();
  verify->add_option("--alpha", vf.prm.alpha, "prop4 overfetch")->capture_default_str();

  // cost
  CostFlags cf;
  SynthFlags cost_synth;
  cost_synth.cfg.zipf_alpha = 2.0;
  cost_synth.cfg.d_dense = 0;
  auto* cost = app.add_subcommand("cost", "Cache-line cost model vs measurement (CSV)");
  cost->add_flag("--synthetic", cf.synth, "generate data from the synthetic flags");
  cost->add_option("--data", cf.data, "dataset file");
  cost->add_option("--query-file", cf.queries, "query dataset file");
  cost->add_option("--line", cf.line, "accumulator slots per cache line B")->capture_default_str();
  cost->add_option("--out", cf.out, "output file (default stdout)");
  cost_synth.add(cost);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? ok : usage;
  }

  try {
    if (*gen) return run_gen(gen_synth, gen_out, gen_qout);
    if (*prep_cmd) return run_prep(prep);
    if (*build) return run_build(build_ix, build_data, build_out, build_no_data);
    if (*search) return run_search(sf);
    if (*bench) return run_bench(bf, bench_ix);
    if (*verify) return run_verify(vf);
    if (*cost) return run_cost(cf, cost_synth);
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return exit_code(e.code());
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return internal;
  }
  return usage;
}
