#pragma once

#include <chrono>
#include <cstddef>
#include <iomanip>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "lmfn/image.hpp"
#include "lmfn/metrics.hpp"
#include "lmfn/model.hpp"

namespace lmfn {

/// Reference model size for the default configuration, in parameters.
inline constexpr double kReferenceModelSize = 1.25e6;

struct ReportRow {
  std::string name;
  double psnr_db = 0.0;
  double ssim = 0.0;
  /// Wall-clock inference seconds; absent when predictions were given directly.
  std::optional<double> seconds;
};

struct EvalReport {
  std::vector<ReportRow> rows;
  std::optional<std::size_t> param_count;

  double mean_psnr() const {
    double s = 0.0;
    for (const auto& r : rows) s += r.psnr_db;
    return rows.empty() ? 0.0 : s / static_cast<double>(rows.size());
  }
  double mean_ssim() const {
    double s = 0.0;
    for (const auto& r : rows) s += r.ssim;
    return rows.empty() ? 0.0 : s / static_cast<double>(rows.size());
  }
  std::optional<double> mean_seconds() const {
    double s = 0.0;
    for (const auto& r : rows) {
      if (!r.seconds) return std::nullopt;
      s += *r.seconds;
    }
    if (rows.empty()) return std::nullopt;
    return s / static_cast<double>(rows.size());
  }

  std::string table() const {
    std::ostringstream os;
    os << std::left << std::setw(32) << "image" << std::right << std::setw(10) << "PSNR"
       << std::setw(10) << "SSIM" << std::setw(12) << "time[s]" << '\n';
    auto line = [&os](const std::string& name, double p, double s, std::optional<double> t) {
      os << std::left << std::setw(32) << name << std::right << std::fixed << std::setprecision(3)
         << std::setw(10) << p << std::setprecision(4) << std::setw(10) << s;
      if (t) {
        os << std::setprecision(4) << std::setw(12) << *t;
      } else {
        os << std::setw(12) << "-";
      }
      os << '\n';
    };
    for (const auto& r : rows) line(r.name, r.psnr_db, r.ssim, r.seconds);
    line("mean", mean_psnr(), mean_ssim(), mean_seconds());
    if (param_count) {
      os << "model size: " << *param_count << " parameters ("
         << std::setprecision(3) << static_cast<double>(*param_count) / 1e6 << "M)\n";
    }
    if (mean_seconds()) os << "timing: single-threaded CPU, this machine\n";
    return os.str();
  }

  void write_csv(std::ostream& os) const {
    os << "image,psnr,ssim,seconds\n" << std::setprecision(9);
    for (const auto& r : rows) {
      os << r.name << ',' << r.psnr_db << ',' << r.ssim << ',';
      if (r.seconds) os << *r.seconds;
      os << '\n';
    }
  }
};

inline ReportRow score(const std::string& name, const ImagePlane& pred, const ImagePlane& target) {
  return ReportRow{name, psnr(pred, target), ssim(pred, target), std::nullopt};
}

/// Scores already-computed predictions against targets.
inline EvalReport report_pairs(const std::vector<std::string>& names,
                               const std::vector<ImagePlane>& preds,
                               const std::vector<ImagePlane>& targets) {
  if (names.size() != preds.size() || preds.size() != targets.size()) {
    throw std::invalid_argument("report: names, predictions and targets differ in count");
  }
  EvalReport r;
  for (std::size_t i = 0; i < preds.size(); ++i) r.rows.push_back(score(names[i], preds[i], targets[i]));
  return r;
}

/// Pads to the model's required multiple by mirroring, runs the model, crops back.
inline ImagePlane deblur(const LmfnModel& model, const ImagePlane& input) {
  const ImagePlane rgb = to_rgb(input);
  const int m = model.config().required_multiple();
  const int pad_h = (m - rgb.height % m) % m;
  const int pad_w = (m - rgb.width % m) % m;
  const ImagePlane padded = (pad_h || pad_w) ? reflect_pad(rgb, pad_h, pad_w) : rgb;
  ImagePlane out = from_tensor(model.predict(to_tensor(padded)));
  out.clamp();
  return (pad_h || pad_w) ? crop(out, 0, 0, rgb.height, rgb.width) : out;
}

/// Runs the model on each blurred input, then scores against the sharp target.
inline EvalReport report(const LmfnModel& model, const std::vector<std::string>& names,
                         const std::vector<ImagePlane>& blurred,
                         const std::vector<ImagePlane>& targets) {
  if (names.size() != blurred.size() || blurred.size() != targets.size()) {
    throw std::invalid_argument("report: names, inputs and targets differ in count");
  }
  EvalReport r;
  r.param_count = model.total_param_count();
  for (std::size_t i = 0; i < blurred.size(); ++i) {
    const auto start = std::chrono::steady_clock::now();
    const ImagePlane pred = deblur(model, blurred[i]);
    const double secs =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    ReportRow row = score(names[i], pred, to_rgb(targets[i]));
    row.seconds = secs;
    r.rows.push_back(row);
  }
  return r;
}

}  // namespace lmfn
