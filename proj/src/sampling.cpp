#include "mlink/sampling.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <set>

#include "mlink/rng.hpp"

namespace mlink {

namespace {

std::vector<int> draw_sample(const PointSet& data, int sample_size, bool localized,
                             double locality_sigma, Rng& rng) {
  const int n = data.size();
  std::vector<int> sample;
  sample.reserve(sample_size);
  sample.push_back(rng.uniform_int(n));
  if (!localized) {
    while (static_cast<int>(sample.size()) < sample_size) {
      const int cand = rng.uniform_int(n);
      if (std::find(sample.begin(), sample.end(), cand) == sample.end())
        sample.push_back(cand);
    }
  } else {
    const auto& first = data.points[sample[0]];
    const double inv = 1.0 / (locality_sigma * locality_sigma);
    std::vector<double> weight(n);
    for (int i = 0; i < n; ++i)
      weight[i] = std::exp(-(data.points[i] - first).squaredNorm() * inv);
    while (static_cast<int>(sample.size()) < sample_size) {
      std::vector<double> cdf(n);
      double acc = 0.0;
      for (int i = 0; i < n; ++i) {
        const bool taken =
            std::find(sample.begin(), sample.end(), i) != sample.end();
        acc += taken ? 0.0 : weight[i];
        cdf[i] = acc;
      }
      int cand;
      if (acc > 0.0) {
        const double u = rng.uniform01() * acc;
        cand = static_cast<int>(std::lower_bound(cdf.begin(), cdf.end(), u) -
                                cdf.begin());
        cand = std::min(cand, n - 1);
      } else {
        // every remaining weight underflowed; fall back to uniform
        do {
          cand = rng.uniform_int(n);
        } while (std::find(sample.begin(), sample.end(), cand) != sample.end());
      }
      if (std::find(sample.begin(), sample.end(), cand) == sample.end())
        sample.push_back(cand);
    }
  }
  return sample;
}

}  // namespace

std::vector<Hypothesis> sample_hypotheses(const PointSet& data,
                                          std::span<const ModelClassSpec> classes,
                                          const SamplerConfig& config) {
  if (classes.empty()) throw ConfigError("sample_hypotheses: no model classes");
  if (config.per_class_counts.size() != classes.size())
    throw ConfigError("sample_hypotheses: per_class_counts size mismatch");
  for (int m : config.per_class_counts)
    if (m <= 0) throw ConfigError("sample_hypotheses: counts must be positive");
  for (const auto& cls : classes)
    if (data.size() < cls.min_sample_size)
      throw InsufficientData("sample_hypotheses: fewer points than the minimal sample of class " +
                             cls.class_id);

  std::vector<Hypothesis> pool;
  for (std::size_t k = 0; k < classes.size(); ++k) {
    const auto& cls = classes[k];
    // distinctness is enforced against already accepted samples of the class
    std::set<std::vector<int>> used;
    for (int j = 0; j < config.per_class_counts[k]; ++j) {
      Rng rng(derive_seed(config.seed, k, static_cast<std::uint64_t>(j)));
      bool placed = false;
      for (int attempt = 0; attempt < config.max_redraws; ++attempt) {
        std::vector<int> sample = draw_sample(data, cls.min_sample_size,
                                              config.localized,
                                              config.locality_sigma, rng);
        std::vector<int> key = sample;
        std::sort(key.begin(), key.end());
        if (used.count(key)) continue;
        try {
          Hypothesis h{cls.fit_minimal(data, sample), std::move(sample)};
          used.insert(std::move(key));
          pool.push_back(std::move(h));
          placed = true;
          break;
        } catch (const DegenerateSample&) {
          // redraw
        }
      }
      if (!placed)
        throw InsufficientData(
            "sample_hypotheses: could not draw a non-degenerate distinct sample for class " +
            cls.class_id);
    }
  }
  return pool;
}

std::vector<Hypothesis> validate_hypotheses(const std::vector<Hypothesis>& hyps,
                                            const PointSet& data,
                                            std::span<const ModelClassSpec> classes,
                                            double epsilon,
                                            const SamplerConfig& config) {
  if (epsilon <= 0.0) throw ConfigError("validate_hypotheses: epsilon must be positive");
  if (config.validation_k <= 1.0 || config.validation_gamma <= 1.0)
    throw ConfigError("validate_hypotheses: validation_k and validation_gamma must exceed 1");

  std::vector<Hypothesis> kept;
  kept.reserve(hyps.size());
  const double wide = config.validation_k * epsilon;
  for (const auto& h : hyps) {
    const auto& cls = find_class(classes, h.model.class_id);
    int tight = 0, broad = 0;
    for (const auto& p : data.points) {
      const double e = cls.residual(h.model, p);
      if (e <= epsilon) ++tight;
      if (e <= wide) ++broad;
    }
    if (tight > 0 &&
        tight * config.validation_k >= config.validation_gamma * broad)
      kept.push_back(h);
  }
  return kept;
}

std::uint64_t pool_hash(std::span<const Hypothesis> hyps) {
  std::uint64_t h = 1469598103934665603ULL;  // FNV-1a
  auto mix = [&h](const void* bytes, std::size_t n) {
    const auto* b = static_cast<const unsigned char*>(bytes);
    for (std::size_t i = 0; i < n; ++i) {
      h ^= b[i];
      h *= 1099511628211ULL;
    }
  };
  for (const auto& hyp : hyps) {
    mix(hyp.model.class_id.data(), hyp.model.class_id.size());
    for (int i = 0; i < hyp.model.params.size(); ++i) {
      const double v = hyp.model.params[i];
      std::uint64_t bits;
      std::memcpy(&bits, &v, sizeof bits);
      mix(&bits, sizeof bits);
    }
  }
  return h;
}

}  // namespace mlink
