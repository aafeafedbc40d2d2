// Classification metrics, transfer ratio and the paired t-test.
#pragma once

#include <boost/math/distributions/students_t.hpp>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <string>
#include <vector>

namespace crossnet {

// C x C counts indexed (gold, predicted).
class ConfusionCounts {
 public:
  explicit ConfusionCounts(std::size_t classes = 3) : classes_(classes), counts_(classes * classes, 0) {}

  void add(std::size_t gold, std::size_t predicted, std::size_t n = 1) {
    if (gold >= classes_ || predicted >= classes_)
      throw std::out_of_range("ConfusionCounts::add: label out of range");
    counts_[gold * classes_ + predicted] += n;
  }

  std::size_t at(std::size_t gold, std::size_t predicted) const { return counts_.at(gold * classes_ + predicted); }
  std::size_t classes() const { return classes_; }
  std::size_t total() const { return std::accumulate(counts_.begin(), counts_.end(), std::size_t{0}); }
  std::size_t correct() const {
    std::size_t c = 0;
    for (std::size_t i = 0; i < classes_; ++i) c += at(i, i);
    return c;
  }
  double accuracy() const { return static_cast<double>(correct()) / static_cast<double>(total()); }

 private:
  std::size_t classes_;
  std::vector<std::size_t> counts_;
};

// Which classes enter the macro average. All is the three-class textbook
// reading; FavorAgainst mirrors the SemEval-2016 official score.
enum class MacroAverage { AllClasses, FavorAgainst };

struct F1Scores {
  double micro = 0.0;
  double macro = 0.0;
  double f = 0.0;  // (micro + macro) / 2
  std::vector<double> per_class;
};

inline F1Scores f1_scores(const ConfusionCounts& cm, MacroAverage avg = MacroAverage::AllClasses) {
  const std::size_t C = cm.classes();
  if (cm.total() == 0) throw std::invalid_argument("f1_scores: no instances");
  auto ratio = [](double num, double den) { return den > 0.0 ? num / den : 0.0; };

  F1Scores s;
  s.per_class.resize(C);
  double tp_all = 0, fp_all = 0, fn_all = 0;
  for (std::size_t k = 0; k < C; ++k) {
    double tp = static_cast<double>(cm.at(k, k));
    double fp = 0, fn = 0;
    for (std::size_t j = 0; j < C; ++j) {
      if (j == k) continue;
      fp += static_cast<double>(cm.at(j, k));
      fn += static_cast<double>(cm.at(k, j));
    }
    const double p = ratio(tp, tp + fp);
    const double r = ratio(tp, tp + fn);
    s.per_class[k] = ratio(2.0 * p * r, p + r);
    tp_all += tp;
    fp_all += fp;
    fn_all += fn;
  }
  const double p = ratio(tp_all, tp_all + fp_all);
  const double r = ratio(tp_all, tp_all + fn_all);
  s.micro = ratio(2.0 * p * r, p + r);

  const std::size_t macro_n = (avg == MacroAverage::FavorAgainst && C >= 2) ? 2 : C;
  s.macro = std::accumulate(s.per_class.begin(), s.per_class.begin() + static_cast<std::ptrdiff_t>(macro_n), 0.0) /
            static_cast<double>(macro_n);
  s.f = (s.micro + s.macro) / 2.0;
  return s;
}

struct MeanStd {
  double mean = 0.0;
  double std = 0.0;  // sample standard deviation (n - 1); 0 for n < 2
};

inline MeanStd mean_std(const std::vector<double>& xs) {
  if (xs.empty()) throw std::invalid_argument("mean_std: empty");
  const double n = static_cast<double>(xs.size());
  const double mean = std::accumulate(xs.begin(), xs.end(), 0.0) / n;
  if (xs.size() < 2) return {mean, 0.0};
  double ss = 0.0;
  for (double x : xs) ss += (x - mean) * (x - mean);
  return {mean, std::sqrt(ss / (n - 1.0))};
}

struct TransferResult {
  double q = 0.0;            // ratio of mean scores
  double cross = 0.0;        // F(S, D)
  double calibration = 0.0;  // F_b(D, D)
};

inline TransferResult transfer_ratio(double cross_f, double calibration_f) {
  if (!(calibration_f > 0.0)) throw std::invalid_argument("transfer_ratio: calibration score must be positive");
  return {cross_f / calibration_f, cross_f, calibration_f};
}

// Two-decimal printed form of a ratio. Truncated, not rounded: that is the
// convention under which published ratio rows follow from their printed
// scores (43.1 / 51.4 = 0.8385 is reported as 0.83). The small offset keeps
// exact two-digit values like 0.75 from dropping a cent to binary error.
inline double ratio_two_decimals(double q) { return std::floor(q * 100.0 + 1e-9) / 100.0; }

// Mean of per-fold ratios cross[i] / calibration[i]; the alternative
// aggregation some published tables appear to use.
inline double transfer_ratio_fold_mean(const std::vector<double>& cross, const std::vector<double>& calibration) {
  if (cross.size() != calibration.size() || cross.empty())
    throw std::invalid_argument("transfer_ratio_fold_mean: fold counts differ");
  double s = 0.0;
  for (std::size_t i = 0; i < cross.size(); ++i) s += transfer_ratio(cross[i], calibration[i]).q;
  return s / static_cast<double>(cross.size());
}

struct TTestResult {
  double t = 0.0;
  double p = 1.0;  // two-sided
  std::size_t df = 0;
};

class DegenerateTestError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

// Paired Student t-test on d = a - b.
inline TTestResult paired_t_test(const std::vector<double>& a, const std::vector<double>& b) {
  if (a.size() != b.size()) throw std::invalid_argument("paired_t_test: samples differ in length");
  if (a.size() < 2) throw std::invalid_argument("paired_t_test: need at least two pairs");
  std::vector<double> d(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) d[i] = a[i] - b[i];
  const auto [mean, sd] = mean_std(d);
  // Differences equal up to rounding (e.g. a = b + 1) carry no variance.
  if (!(sd > 1e-12 * std::max(1.0, std::abs(mean)))) throw DegenerateTestError("paired_t_test: differences have zero variance");
  const double n = static_cast<double>(d.size());
  TTestResult r;
  r.df = d.size() - 1;
  r.t = mean / (sd / std::sqrt(n));
  const boost::math::students_t_distribution<double> dist(static_cast<double>(r.df));
  r.p = std::min(1.0, 2.0 * boost::math::cdf(boost::math::complement(dist, std::abs(r.t))));
  return r;
}

}  // namespace crossnet
