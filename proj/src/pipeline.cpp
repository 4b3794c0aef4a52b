#include "l2t/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <stdexcept>
#include <utility>

#include "l2t/io.hpp"
#include "l2t/rng.hpp"

namespace l2t {

namespace fs = std::filesystem;

namespace {

// Seed salts: every child stream hangs off its parent through derive_seed,
// so items stay independent of processing order.
constexpr std::uint64_t kSaltClassMeans = 1;
constexpr std::uint64_t kSaltSourceFrame = 2;
constexpr std::uint64_t kSaltTargetFrame = 3;
constexpr std::uint64_t kSaltSourceSamples = 4;
constexpr std::uint64_t kSaltTargetSamples = 5;
constexpr std::uint64_t kSaltExtractor = 11;
constexpr std::uint64_t kSaltRatio = 12;
constexpr std::uint64_t kSaltFeaturePairing = 13;
constexpr std::uint64_t kSaltInfer = 21;
constexpr std::uint64_t kSaltSplit = 22;
constexpr std::uint64_t kSaltBaseProj = 23;

constexpr double kClassSeparation = 3.0;

std::string item_dir_name(const char* prefix, std::size_t index) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%s_%04zu", prefix, index);
  return buf;
}

Eigen::MatrixXd labels_to_matrix(const std::vector<int>& labels) {
  Eigen::MatrixXd m(static_cast<Eigen::Index>(labels.size()), 1);
  for (std::size_t i = 0; i < labels.size(); ++i) {
    m(static_cast<Eigen::Index>(i), 0) = static_cast<double>(labels[i]);
  }
  return m;
}

std::vector<int> matrix_to_labels(const Eigen::MatrixXd& m, const fs::path& path) {
  if (m.cols() != 1) {
    throw std::runtime_error(path.string() + ": label file must have one column");
  }
  std::vector<int> labels(static_cast<std::size_t>(m.rows()));
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    const double v = m(i, 0);
    if (!(v >= 0.0) || v != std::floor(v) ||
        v > static_cast<double>(std::numeric_limits<int>::max())) {
      throw std::runtime_error(path.string() +
                               ": labels must be nonnegative integers");
    }
    labels[static_cast<std::size_t>(i)] = static_cast<int>(v);
  }
  return labels;
}

Domain sample_domain(const Eigen::MatrixXd& frame,
                     const Eigen::MatrixXd& class_means,
                     const SynthConfig& cfg, std::uint64_t seed,
                     const std::string& name) {
  Rng rng(seed);
  const Eigen::Index rows =
      static_cast<Eigen::Index>(cfg.classes_per_domain) * cfg.samples_per_class;
  Domain d;
  d.name = name;
  d.features.resize(rows, cfg.m);
  d.labels.reserve(static_cast<std::size_t>(rows));
  Eigen::Index row = 0;
  for (int c = 0; c < cfg.classes_per_domain; ++c) {
    for (int i = 0; i < cfg.samples_per_class; ++i) {
      const Eigen::VectorXd latent =
          class_means.row(c).transpose() + rng.gaussian(cfg.u_true, 1);
      Eigen::VectorXd x = frame * latent;
      x += cfg.noise_sigma * rng.gaussian(cfg.m, 1);
      d.features.row(row++) = x.transpose();
      d.labels.push_back(c);
    }
  }
  return d;
}

void write_text_file(const fs::path& path, const std::string& buf) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) {
    throw std::runtime_error(path.string() + ": cannot open for writing");
  }
  out.write(buf.data(), static_cast<std::streamsize>(buf.size()));
  out.flush();
  if (!out) {
    throw std::runtime_error(path.string() + ": write error");
  }
}

}  // namespace

void Experience::validate() const {
  source.validate();
  target.validate();
  if (!source.labeled() || !target.labeled()) {
    throw std::invalid_argument("experience domains must carry labels");
  }
  if (source.dim() != target.dim()) {
    throw std::invalid_argument("experience domains disagree on dimension");
  }
  w.validate();
  if (w.dim() != source.dim()) {
    throw std::invalid_argument("experience W row count does not match the pair");
  }
  if (!std::isfinite(ratio) || ratio <= 0.0) {
    throw std::invalid_argument("experience ratio must be positive");
  }
  if (n_labeled < 1) {
    throw std::invalid_argument("experience labeled count must be positive");
  }
}

Eigen::Index ExperienceStore::dim() const {
  return experiences.empty() ? 0 : experiences.front().source.dim();
}

void ExperienceStore::validate() const {
  for (const Experience& e : experiences) {
    e.validate();
    if (e.source.dim() != dim()) {
      throw std::invalid_argument("experiences disagree on the feature dimension");
    }
  }
  for (const std::string& name : extractor_names) {
    extractor_from_string(name);  // throws on an unknown name
  }
}

std::pair<Domain, Domain> gen_pair(const SynthConfig& cfg) {
  if (cfg.m < 1) {
    throw std::invalid_argument("ambient dimension must be positive");
  }
  if (cfg.u_true < 1 || cfg.u_true > cfg.m) {
    throw std::invalid_argument("latent dimension must lie in [1, m]");
  }
  if (cfg.classes_per_domain < 1 || cfg.samples_per_class < 1) {
    throw std::invalid_argument("class and sample counts must be positive");
  }
  if (!(cfg.relatedness >= 0.0 && cfg.relatedness <= 1.0)) {
    throw std::invalid_argument("relatedness must lie in [0, 1]");
  }
  if (!(cfg.noise_sigma >= 0.0)) {
    throw std::invalid_argument("noise sigma must be nonnegative");
  }

  // Class geometry is shared by both domains; the frames decide how much of
  // it survives the change of basis.
  Rng mean_rng(derive_seed(cfg.seed, kSaltClassMeans));
  const Eigen::MatrixXd class_means =
      kClassSeparation * mean_rng.gaussian(cfg.classes_per_domain, cfg.u_true);

  const Eigen::MatrixXd frame_s =
      random_proj(cfg.m, cfg.u_true, derive_seed(cfg.seed, kSaltSourceFrame))
          .entries;
  const Eigen::Index shared = std::clamp<Eigen::Index>(
      static_cast<Eigen::Index>(std::llround(cfg.relatedness *
                                             static_cast<double>(cfg.u_true))),
      0, cfg.u_true);
  Eigen::MatrixXd frame_t(cfg.m, cfg.u_true);
  frame_t.leftCols(shared) = frame_s.leftCols(shared);
  Rng frame_rng(derive_seed(cfg.seed, kSaltTargetFrame));
  for (Eigen::Index j = shared; j < cfg.u_true; ++j) {
    Eigen::VectorXd v = frame_rng.gaussian(cfg.m, 1);
    for (int pass = 0; pass < 2 && j > 0; ++pass) {
      v -= frame_t.leftCols(j) * (frame_t.leftCols(j).transpose() * v);
    }
    const double norm = v.norm();
    if (norm <= 0.0) {
      throw std::runtime_error("degenerate draw while building the target frame");
    }
    frame_t.col(j) = v / norm;
  }

  Domain source = sample_domain(frame_s, class_means, cfg,
                                derive_seed(cfg.seed, kSaltSourceSamples),
                                "synth-" + std::to_string(cfg.seed) + "-src");
  Domain target = sample_domain(frame_t, class_means, cfg,
                                derive_seed(cfg.seed, kSaltTargetSamples),
                                "synth-" + std::to_string(cfg.seed) + "-tgt");
  return {std::move(source), std::move(target)};
}

double nn_accuracy(const Eigen::MatrixXd& train_rows,
                   const std::vector<int>& train_labels,
                   const Eigen::MatrixXd& test_rows,
                   const std::vector<int>& test_labels) {
  if (train_rows.rows() < 1) {
    throw std::invalid_argument("1-NN requires a nonempty training set");
  }
  if (test_rows.rows() < 1) {
    throw std::invalid_argument("1-NN requires at least one test row");
  }
  if (static_cast<Eigen::Index>(train_labels.size()) != train_rows.rows() ||
      static_cast<Eigen::Index>(test_labels.size()) != test_rows.rows()) {
    throw std::invalid_argument("label counts do not match row counts");
  }
  if (train_rows.cols() != test_rows.cols()) {
    throw std::invalid_argument("train and test dimensions differ");
  }
  Eigen::Index correct = 0;
  for (Eigen::Index t = 0; t < test_rows.rows(); ++t) {
    Eigen::Index best = 0;
    double best_d = (train_rows.row(0) - test_rows.row(t)).squaredNorm();
    for (Eigen::Index i = 1; i < train_rows.rows(); ++i) {
      const double d = (train_rows.row(i) - test_rows.row(t)).squaredNorm();
      if (d < best_d) {  // ties keep the lower train index
        best_d = d;
        best = i;
      }
    }
    if (train_labels[static_cast<std::size_t>(best)] ==
        test_labels[static_cast<std::size_t>(t)]) {
      ++correct;
    }
  }
  return static_cast<double>(correct) / static_cast<double>(test_rows.rows());
}

RatioResult improvement_ratio_detailed(const Domain& source,
                                       const Domain& target,
                                       const FactorMatrix& w, int n_labeled,
                                       std::uint64_t seed,
                                       const RatioOptions& opts) {
  source.validate();
  target.validate();
  w.validate();
  if (!target.labeled()) {
    throw std::invalid_argument("target must be labeled");
  }
  if (opts.include_source && !source.labeled()) {
    throw std::invalid_argument("source must be labeled");
  }
  if (source.dim() != target.dim()) {
    throw std::invalid_argument("source and target feature dimensions differ");
  }
  if (w.dim() != target.dim()) {
    throw std::invalid_argument("W row count must match the feature dimension");
  }
  if (n_labeled < 2) {
    throw std::invalid_argument(
        "n_labeled must be at least 2 to cover two classes");
  }
  if (static_cast<Eigen::Index>(n_labeled) >= target.rows()) {
    throw std::invalid_argument("n_labeled must leave at least one test row");
  }

  // Stratified draw: shuffle inside each class, then take rows class by
  // class round-robin, which puts at least one row in every present class
  // whenever the budget allows.
  std::vector<std::vector<Eigen::Index>> by_class(
      static_cast<std::size_t>(target.class_count()));
  for (Eigen::Index i = 0; i < target.rows(); ++i) {
    by_class[static_cast<std::size_t>(target.labels[static_cast<std::size_t>(i)])]
        .push_back(i);
  }
  std::vector<std::vector<Eigen::Index>> present;
  for (auto& group : by_class) {
    if (!group.empty()) {
      present.push_back(std::move(group));
    }
  }
  if (present.size() < 2) {
    throw std::invalid_argument("target must contain at least two classes");
  }
  Rng rng(seed);
  for (auto& group : present) {
    rng.shuffle(group);
  }
  std::vector<Eigen::Index> labeled;
  labeled.reserve(static_cast<std::size_t>(n_labeled));
  std::vector<std::size_t> cursor(present.size(), 0);
  while (static_cast<int>(labeled.size()) < n_labeled) {
    for (std::size_t c = 0;
         c < present.size() && static_cast<int>(labeled.size()) < n_labeled;
         ++c) {
      if (cursor[c] < present[c].size()) {
        labeled.push_back(present[c][cursor[c]++]);
      }
    }
  }
  std::sort(labeled.begin(), labeled.end());
  std::vector<char> is_labeled(static_cast<std::size_t>(target.rows()), 0);
  for (Eigen::Index idx : labeled) {
    is_labeled[static_cast<std::size_t>(idx)] = 1;
  }

  const Eigen::Index test_count = target.rows() - n_labeled;
  const Eigen::Index m = target.dim();
  Eigen::MatrixXd train_raw(n_labeled, m);
  Eigen::MatrixXd test_raw(test_count, m);
  std::vector<int> train_labels;
  std::vector<int> test_labels;
  train_labels.reserve(static_cast<std::size_t>(n_labeled));
  test_labels.reserve(static_cast<std::size_t>(test_count));
  Eigen::Index tr = 0;
  Eigen::Index te = 0;
  for (Eigen::Index i = 0; i < target.rows(); ++i) {
    if (is_labeled[static_cast<std::size_t>(i)]) {
      train_raw.row(tr++) = target.features.row(i);
      train_labels.push_back(target.labels[static_cast<std::size_t>(i)]);
    } else {
      test_raw.row(te++) = target.features.row(i);
      test_labels.push_back(target.labels[static_cast<std::size_t>(i)]);
    }
  }

  const double p_t = nn_accuracy(train_raw, train_labels, test_raw, test_labels);

  // Transfer side: labeled target rows first (same order as the baseline so
  // tie-breaking agrees), then every source row, all embedded by W.
  const Eigen::Index extra = opts.include_source ? source.rows() : 0;
  Eigen::MatrixXd train_emb(n_labeled + extra, w.latent_dim());
  train_emb.topRows(n_labeled) = train_raw * w.entries;
  std::vector<int> transfer_labels = train_labels;
  if (opts.include_source) {
    train_emb.bottomRows(extra) = source.features * w.entries;
    transfer_labels.insert(transfer_labels.end(), source.labels.begin(),
                           source.labels.end());
  }
  const Eigen::MatrixXd test_emb = test_raw * w.entries;
  const double p_st = nn_accuracy(train_emb, transfer_labels, test_emb, test_labels);

  const double floor = 1.0 / static_cast<double>(test_count);
  RatioResult out;
  out.with_transfer = p_st;
  out.without_transfer = p_t;
  out.floored = p_st < floor || p_t < floor;
  out.ratio = std::max(p_st, floor) / std::max(p_t, floor);
  return out;
}

double improvement_ratio(const Domain& source, const Domain& target,
                         const FactorMatrix& w, int n_labeled,
                         std::uint64_t seed, const RatioOptions& opts) {
  return improvement_ratio_detailed(source, target, w, n_labeled, seed, opts)
      .ratio;
}

FactorMatrix extract_w(ExtractorId id, const Domain& source,
                       const Domain& target, Eigen::Index u,
                       std::uint64_t seed) {
  switch (id) {
    case ExtractorId::joint_pca:
      return joint_pca(source.features, target.features, u);
    case ExtractorId::target_pca:
      return target_pca(target.features, u);
    case ExtractorId::tca_lite:
      return tca_lite(source.features, target.features, u);
    case ExtractorId::random_proj:
      return random_proj(target.dim(), u, seed);
    case ExtractorId::kpca_recover:
      return kpca_recover(target.features, u,
                          mean_energy(target.features, target.features));
  }
  throw std::logic_error("unhandled extractor id");
}

ExperienceStore generate_experiences(int n,
                                     const std::vector<ExtractorId>& extractors,
                                     const SynthConfig& synth_template,
                                     const std::vector<int>& n_labeled_choices,
                                     std::uint64_t seed) {
  if (n < 0) {
    throw std::invalid_argument("experience count must be nonnegative");
  }
  if (extractors.empty()) {
    throw std::invalid_argument("extractor list must be nonempty");
  }
  if (n_labeled_choices.empty()) {
    throw std::invalid_argument("labeled-count choices must be nonempty");
  }

  ExperienceStore store;
  store.grid_exponents = default_bandwidth_exponents();
  for (ExtractorId id : extractors) {
    const std::string name = to_string(id);
    if (std::find(store.extractor_names.begin(), store.extractor_names.end(),
                  name) == store.extractor_names.end()) {
      store.extractor_names.push_back(name);
    }
  }
  store.experiences.reserve(static_cast<std::size_t>(n));
  for (int e = 0; e < n; ++e) {
    const std::uint64_t child = derive_seed(seed, static_cast<std::uint64_t>(e));
    SynthConfig cfg = synth_template;
    cfg.seed = child;
    auto [source, target] = gen_pair(cfg);

    Experience exp;
    exp.extractor = extractors[static_cast<std::size_t>(e) % extractors.size()];
    exp.n_labeled =
        n_labeled_choices[static_cast<std::size_t>(e) % n_labeled_choices.size()];
    exp.seed = child;
    exp.w = extract_w(exp.extractor, source, target, synth_template.u_true,
                      derive_seed(child, kSaltExtractor));
    const RatioResult rr = improvement_ratio_detailed(
        source, target, exp.w, exp.n_labeled, derive_seed(child, kSaltRatio));
    exp.ratio = rr.ratio;
    exp.accuracy_floored = rr.floored;
    exp.source = std::move(source);
    exp.target = std::move(target);
    store.experiences.push_back(std::move(exp));
  }
  store.validate();
  return store;
}

FeatureSet featurize_store(const ExperienceStore& store, int r) {
  store.validate();
  FeatureSet fs;
  fs.r = r;
  fs.grid_exponents = store.grid_exponents;
  fs.features.reserve(store.experiences.size());
  for (const Experience& e : store.experiences) {
    fs.features.push_back(featurize(e.source, e.target, e.w, e.ratio, r,
                                    derive_seed(e.seed, kSaltFeaturePairing)));
    fs.ratios.push_back(e.ratio);
    fs.n_labeled.push_back(e.n_labeled);
  }
  return fs;
}

std::vector<double> EvalReport::means() const {
  std::vector<double> out;
  if (ratios.rows() == 0) {
    return out;
  }
  out.reserve(static_cast<std::size_t>(ratios.cols()));
  for (Eigen::Index j = 0; j < ratios.cols(); ++j) {
    out.push_back(ratios.col(j).mean());
  }
  return out;
}

EvalReport evaluate_l2t(const ExperienceStore& store,
                        const ReflectionModel& model,
                        const std::vector<std::pair<Domain, Domain>>& test_pairs,
                        const std::vector<ExtractorId>& base, int n_labeled,
                        const InferConfig& cfg) {
  model.validate();
  EvalReport report;
  report.methods.push_back("l2t");
  for (ExtractorId id : base) {
    report.methods.push_back(to_string(id));
  }
  report.ratios.resize(static_cast<Eigen::Index>(test_pairs.size()),
                       static_cast<Eigen::Index>(report.methods.size()));
  for (std::size_t i = 0; i < test_pairs.size(); ++i) {
    const Domain& source = test_pairs[i].first;
    const Domain& target = test_pairs[i].second;
    if (!store.experiences.empty() && store.dim() != source.dim()) {
      throw std::invalid_argument(
          "test pair dimension differs from the experience store");
    }
    report.pair_ids.push_back(item_dir_name("pair", i));
    const std::uint64_t pair_seed =
        derive_seed(cfg.seed, static_cast<std::uint64_t>(i));
    InferConfig pair_cfg = cfg;
    pair_cfg.seed = derive_seed(pair_seed, kSaltInfer);
    // One split per pair: every method is scored on the same labeled rows.
    const std::uint64_t split_seed = derive_seed(pair_seed, kSaltSplit);

    const FactorMatrix w = infer_w(source, target, model, pair_cfg);
    report.ratios(static_cast<Eigen::Index>(i), 0) =
        improvement_ratio(source, target, w, n_labeled, split_seed);
    for (std::size_t j = 0; j < base.size(); ++j) {
      const FactorMatrix wb =
          extract_w(base[j], source, target, cfg.u,
                    derive_seed(pair_seed, kSaltBaseProj + j));
      report.ratios(static_cast<Eigen::Index>(i),
                    static_cast<Eigen::Index>(j + 1)) =
          improvement_ratio(source, target, wb, n_labeled, split_seed);
    }
  }
  return report;
}

// --- persistence -------------------------------------------------------------

void save_store(const fs::path& dir, const ExperienceStore& store) {
  store.validate();
  fs::create_directories(dir);
  io::Manifest man;
  man.set_int("format_version", 1);
  man.set_int("experience_count",
              static_cast<long long>(store.experiences.size()));
  man.set_int("extractor_count",
              static_cast<long long>(store.extractor_names.size()));
  man.set_list("extractors", store.extractor_names);
  man.set_double_list("grid_exponents", store.grid_exponents);
  man.set_int("feature_dim", store.dim());
  man.save(dir / "manifest.txt");
  for (std::size_t i = 0; i < store.experiences.size(); ++i) {
    const Experience& e = store.experiences[i];
    const fs::path ed = dir / item_dir_name("exp", i);
    fs::create_directories(ed);
    io::save_matrix(ed / "source_x.l2tm", e.source.features);
    io::save_matrix(ed / "source_labels.l2tm", labels_to_matrix(e.source.labels));
    io::save_matrix(ed / "target_x.l2tm", e.target.features);
    io::save_matrix(ed / "target_labels.l2tm", labels_to_matrix(e.target.labels));
    io::save_matrix(ed / "w.l2tm", e.w.entries);
    io::Manifest meta;
    meta.set("extractor", to_string(e.extractor));
    meta.set_int("n_labeled", e.n_labeled);
    meta.set_double("ratio", e.ratio);
    meta.set_uint("seed", e.seed);
    meta.set_int("accuracy_floored", e.accuracy_floored ? 1 : 0);
    meta.set("source_name", e.source.name);
    meta.set("target_name", e.target.name);
    meta.save(ed / "meta.txt");
  }
}

ExperienceStore load_store(const fs::path& dir) {
  const fs::path man_path = dir / "manifest.txt";
  io::Manifest man = io::Manifest::load(man_path);
  const long long version = man.get_int("format_version");
  if (version != 1) {
    throw std::runtime_error(man_path.string() + ": unsupported format version " +
                             std::to_string(version));
  }
  ExperienceStore store;
  store.extractor_names = man.get_list("extractors");
  store.grid_exponents = man.get_double_list("grid_exponents");
  const long long count = man.get_int("experience_count");
  if (count < 0) {
    throw std::runtime_error(man_path.string() + ": negative experience count");
  }
  store.experiences.reserve(static_cast<std::size_t>(count));
  for (long long i = 0; i < count; ++i) {
    const fs::path ed = dir / item_dir_name("exp", static_cast<std::size_t>(i));
    Experience e;
    e.source.features = io::load_matrix(ed / "source_x.l2tm");
    e.source.labels =
        matrix_to_labels(io::load_matrix(ed / "source_labels.l2tm"),
                         ed / "source_labels.l2tm");
    e.target.features = io::load_matrix(ed / "target_x.l2tm");
    e.target.labels =
        matrix_to_labels(io::load_matrix(ed / "target_labels.l2tm"),
                         ed / "target_labels.l2tm");
    e.w.entries = io::load_matrix(ed / "w.l2tm");
    const io::Manifest meta = io::Manifest::load(ed / "meta.txt");
    e.extractor = extractor_from_string(meta.get("extractor"));
    e.n_labeled = static_cast<int>(meta.get_int("n_labeled"));
    e.ratio = meta.get_double("ratio");
    e.seed = meta.get_uint("seed");
    e.accuracy_floored = meta.get_int("accuracy_floored") != 0;
    e.source.name = meta.get("source_name");
    e.target.name = meta.get("target_name");
    store.experiences.push_back(std::move(e));
  }
  store.validate();
  return store;
}

void save_feature_set(const fs::path& dir, const FeatureSet& fs_data) {
  if (fs_data.features.size() != fs_data.ratios.size() ||
      fs_data.features.size() != fs_data.n_labeled.size()) {
    throw std::invalid_argument("feature set lists must run parallel");
  }
  fs::create_directories(dir);
  io::Manifest man;
  man.set_int("format_version", 1);
  man.set_int("experience_count", static_cast<long long>(fs_data.features.size()));
  man.set_int("r", fs_data.r);
  man.set_double_list("grid_exponents", fs_data.grid_exponents);
  man.set_int("correct_enabled", fs_data.correction.enabled ? 1 : 0);
  man.set_int("correct_p", fs_data.correction.p);
  man.set_int("correct_q", fs_data.correction.q);
  man.save(dir / "manifest.txt");
  for (std::size_t i = 0; i < fs_data.features.size(); ++i) {
    const ExperienceFeatures& f = fs_data.features[i];
    const fs::path ed = dir / item_dir_name("exp", i);
    fs::create_directories(ed);
    io::save_matrix(ed / "mmd.l2tm", f.mmd);
    io::save_matrix(ed / "variance.l2tm", f.variance);
    io::save_matrix(ed / "discriminant.l2tm", f.discriminant);
    io::Manifest meta;
    meta.set_double("target", f.inverse_ratio_target);
    meta.set_double("ratio", fs_data.ratios[i]);
    meta.set_int("n_labeled", fs_data.n_labeled[i]);
    meta.save(ed / "meta.txt");
  }
}

FeatureSet load_feature_set(const fs::path& dir) {
  const fs::path man_path = dir / "manifest.txt";
  io::Manifest man = io::Manifest::load(man_path);
  const long long version = man.get_int("format_version");
  if (version != 1) {
    throw std::runtime_error(man_path.string() + ": unsupported format version " +
                             std::to_string(version));
  }
  FeatureSet out;
  out.r = static_cast<int>(man.get_int("r"));
  out.grid_exponents = man.get_double_list("grid_exponents");
  out.correction.enabled = man.get_int("correct_enabled") != 0;
  out.correction.p = static_cast<int>(man.get_int("correct_p"));
  out.correction.q = static_cast<int>(man.get_int("correct_q"));
  const long long count = man.get_int("experience_count");
  for (long long i = 0; i < count; ++i) {
    const fs::path ed = dir / item_dir_name("exp", static_cast<std::size_t>(i));
    ExperienceFeatures f;
    f.mmd = io::load_matrix(ed / "mmd.l2tm");
    f.variance = io::load_matrix(ed / "variance.l2tm");
    f.discriminant = io::load_matrix(ed / "discriminant.l2tm");
    const io::Manifest meta = io::Manifest::load(ed / "meta.txt");
    f.inverse_ratio_target = meta.get_double("target");
    out.features.push_back(std::move(f));
    out.ratios.push_back(meta.get_double("ratio"));
    out.n_labeled.push_back(static_cast<int>(meta.get_int("n_labeled")));
  }
  return out;
}

void save_model(const fs::path& dir, const ModelArtifacts& art) {
  art.model.validate();
  fs::create_directories(dir);
  io::Manifest man;
  man.set_int("format_version", 1);
  man.set_double("lambda", art.model.lambda);
  man.set_double("mu", art.model.mu);
  man.set_double("bias", art.model.bias);
  man.set_double("b_corr", art.b_corr);
  man.set_double("objective", art.objective);
  man.set_int("winning_restart", art.winning_restart);
  man.set_double_list("unit_bandwidths", art.model.bank.bandwidths);
  man.save(dir / "manifest.txt");
  io::save_matrix(dir / "beta.l2tm", art.model.beta);
}

ModelArtifacts load_model(const fs::path& dir) {
  const fs::path man_path = dir / "manifest.txt";
  io::Manifest man = io::Manifest::load(man_path);
  const long long version = man.get_int("format_version");
  if (version != 1) {
    throw std::runtime_error(man_path.string() + ": unsupported format version " +
                             std::to_string(version));
  }
  ModelArtifacts art;
  art.model.lambda = man.get_double("lambda");
  art.model.mu = man.get_double("mu");
  art.model.bias = man.get_double("bias");
  art.b_corr = man.get_double("b_corr");
  art.objective = man.get_double("objective");
  art.winning_restart = static_cast<int>(man.get_int("winning_restart"));
  art.model.bank.bandwidths = man.get_double_list("unit_bandwidths");
  const Eigen::MatrixXd beta = io::load_matrix(dir / "beta.l2tm");
  if (beta.cols() != 1) {
    throw std::runtime_error((dir / "beta.l2tm").string() +
                             ": expected a single-column matrix");
  }
  art.model.beta = beta.col(0);
  art.model.validate();
  return art;
}

void save_pair(const fs::path& dir, const Domain& source, const Domain& target) {
  source.validate();
  target.validate();
  fs::create_directories(dir);
  io::save_matrix(dir / "source_x.l2tm", source.features);
  io::save_matrix(dir / "source_labels.l2tm", labels_to_matrix(source.labels));
  io::save_matrix(dir / "target_x.l2tm", target.features);
  io::save_matrix(dir / "target_labels.l2tm", labels_to_matrix(target.labels));
  io::Manifest meta;
  meta.set("source_name", source.name);
  meta.set("target_name", target.name);
  meta.save(dir / "meta.txt");
}

std::pair<Domain, Domain> load_pair(const fs::path& dir) {
  Domain source;
  Domain target;
  source.features = io::load_matrix(dir / "source_x.l2tm");
  source.labels = matrix_to_labels(io::load_matrix(dir / "source_labels.l2tm"),
                                   dir / "source_labels.l2tm");
  target.features = io::load_matrix(dir / "target_x.l2tm");
  target.labels = matrix_to_labels(io::load_matrix(dir / "target_labels.l2tm"),
                                   dir / "target_labels.l2tm");
  const io::Manifest meta = io::Manifest::load(dir / "meta.txt");
  source.name = meta.get("source_name");
  target.name = meta.get("target_name");
  source.validate();
  target.validate();
  return {std::move(source), std::move(target)};
}

std::vector<std::pair<Domain, Domain>> load_test_pairs(const fs::path& dir) {
  std::vector<std::pair<Domain, Domain>> pairs;
  if (fs::exists(dir / "manifest.txt")) {
    const ExperienceStore store = load_store(dir);
    pairs.reserve(store.experiences.size());
    for (const Experience& e : store.experiences) {
      pairs.emplace_back(e.source, e.target);
    }
    return pairs;
  }
  std::vector<fs::path> pair_dirs;
  if (fs::exists(dir)) {
    for (const auto& entry : fs::directory_iterator(dir)) {
      if (entry.is_directory() &&
          entry.path().filename().string().rfind("pair", 0) == 0) {
        pair_dirs.push_back(entry.path());
      }
    }
  }
  std::sort(pair_dirs.begin(), pair_dirs.end());
  for (const fs::path& p : pair_dirs) {
    pairs.push_back(load_pair(p));
  }
  if (pairs.empty()) {
    throw std::runtime_error(
        dir.string() +
        ": no pairs found (expected a store manifest or pair_* directories)");
  }
  return pairs;
}

void save_report(const fs::path& path, const EvalReport& report) {
  if (report.ratios.rows() != static_cast<Eigen::Index>(report.pair_ids.size()) ||
      report.ratios.cols() != static_cast<Eigen::Index>(report.methods.size())) {
    throw std::invalid_argument("report shape does not match its labels");
  }
  std::string buf;
  buf += "pairs = " + std::to_string(report.pair_ids.size()) + "\n";
  buf += "methods = [";
  for (std::size_t j = 0; j < report.methods.size(); ++j) {
    if (j > 0) {
      buf += ", ";
    }
    buf += report.methods[j];
  }
  buf += "]\n";
  for (std::size_t i = 0; i < report.pair_ids.size(); ++i) {
    for (std::size_t j = 0; j < report.methods.size(); ++j) {
      buf += "row " + report.pair_ids[i] + " " + report.methods[j] + " " +
             io::format_double(report.ratios(static_cast<Eigen::Index>(i),
                                             static_cast<Eigen::Index>(j))) +
             "\n";
    }
  }
  const std::vector<double> mean_values = report.means();
  for (std::size_t j = 0; j < mean_values.size(); ++j) {
    buf += "mean " + report.methods[j] + " " + io::format_double(mean_values[j]) +
           "\n";
  }
  write_text_file(path, buf);
}

}  // namespace l2t
