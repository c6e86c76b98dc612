#pragma once

// Gray-area agreement report between the raw and calibrated rankings, plot
// artifacts (CSV twin + SVG) and atomic file output.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "revcal/common.hpp"
#include "revcal/csv.hpp"
#include "revcal/scoring.hpp"

namespace revcal {

/// Writes to a sibling temporary file, then renames over the target.
inline void write_atomic(const std::filesystem::path& path,
                         const std::string& content) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot write " + tmp.string());
    out << content;
    out.flush();
    if (!out) throw Error("write failed: " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

// ---- gray area -----------------------------------------------------------------

enum class Agreement { kAgreeAccept, kAgreeReject, kDisagree };

inline std::string_view to_string(Agreement a) {
  switch (a) {
    case Agreement::kAgreeAccept:
      return "agree-accept";
    case Agreement::kAgreeReject:
      return "agree-reject";
    case Agreement::kDisagree:
      return "disagree";
  }
  return "";
}

struct GrayAreaEntry {
  PaperId paper;
  bool accept_si = false;
  bool accept_si_cal = false;
  Agreement agreement = Agreement::kAgreeReject;
  /// accept / reject for agreeing papers; empty for disagreements, which go
  /// to human adjudication.
  std::optional<bool> final_decision;
};

struct GrayAreaReport {
  std::vector<GrayAreaEntry> entries;  // PaperId order
  std::size_t agree_accept = 0;
  std::size_t agree_reject = 0;
  std::size_t disagree = 0;
  std::string notice;  // set when the report is empty by construction

  std::size_t size() const { return entries.size(); }
};

inline GrayAreaReport gray_area(const DecisionList& by_si,
                                const DecisionList& by_si_cal) {
  const auto a = by_si.by_paper();
  const auto b = by_si_cal.by_paper();
  if (a.size() != by_si.entries.size() || b.size() != by_si_cal.entries.size()) {
    throw Error("gray area: duplicate paper in a decision list");
  }
  if (a.size() != b.size()) throw Error("gray area: paper sets differ");
  GrayAreaReport rep;
  for (const auto& [paper, acc] : a) {
    auto it = b.find(paper);
    if (it == b.end()) {
      throw Error("gray area: paper '" + paper.value +
                  "' missing from the calibrated ranking");
    }
    GrayAreaEntry e{paper, acc, it->second};
    if (acc && it->second) {
      e.agreement = Agreement::kAgreeAccept;
      e.final_decision = true;
      ++rep.agree_accept;
    } else if (!acc && !it->second) {
      e.agreement = Agreement::kAgreeReject;
      e.final_decision = false;
      ++rep.agree_reject;
    } else {
      e.agreement = Agreement::kDisagree;
      ++rep.disagree;
    }
    rep.entries.push_back(std::move(e));
  }
  return rep;
}

inline std::string to_csv(const GrayAreaReport& rep) {
  std::string out;
  csv::write_row(out, {"paper_id", "decision_SI", "decision_SI_cal",
                       "agreement", "final_decision"});
  auto word = [](bool acc) { return acc ? "accept" : "reject"; };
  for (const auto& e : rep.entries) {
    csv::write_row(out, {e.paper.value, word(e.accept_si), word(e.accept_si_cal),
                         std::string(to_string(e.agreement)),
                         e.final_decision ? word(*e.final_decision)
                                          : "human review"});
  }
  return out;
}

inline nlohmann::json to_json(const GrayAreaReport& rep) {
  nlohmann::json flagged = nlohmann::json::array();
  for (const auto& e : rep.entries) {
    if (e.agreement == Agreement::kDisagree) flagged.push_back(e.paper.value);
  }
  nlohmann::json j = {{"papers", rep.size()},
                      {"agree_accept", rep.agree_accept},
                      {"agree_reject", rep.agree_reject},
                      {"disagree", rep.disagree},
                      {"flagged_for_human_review", flagged}};
  if (!rep.notice.empty()) j["notice"] = rep.notice;
  return j;
}

// ---- plots -----------------------------------------------------------------------

struct HistogramBin {
  double lo = 0.0;
  double hi = 0.0;
  std::size_t count = 0;
};

/// Equal-width bins over [min, max]; the last bin is closed. A constant input
/// is centred in a unit-wide range, so it lands in a single bin.
inline std::vector<HistogramBin> histogram(std::span<const double> values,
                                           std::size_t bins) {
  if (values.empty()) throw Error("histogram: no values");
  if (bins == 0) throw Error("histogram: need at least one bin");
  auto [lo_it, hi_it] = std::minmax_element(values.begin(), values.end());
  double lo = *lo_it;
  double hi = *hi_it;
  if (hi == lo) {
    lo -= 0.5;
    hi += 0.5;
  }
  const double width = (hi - lo) / static_cast<double>(bins);
  std::vector<HistogramBin> out(bins);
  for (std::size_t b = 0; b < bins; ++b) {
    out[b].lo = lo + width * static_cast<double>(b);
    out[b].hi = b + 1 == bins ? hi : lo + width * static_cast<double>(b + 1);
  }
  for (double v : values) {
    auto b = static_cast<std::size_t>(std::floor((v - lo) / width));
    out[std::min(b, bins - 1)].count++;
  }
  return out;
}

namespace svg {

struct Frame {
  double x_lo, x_hi, y_lo, y_hi;
  static constexpr double kWidth = 640, kHeight = 420, kLeft = 70, kRight = 20,
                          kTop = 40, kBottom = 60;

  double px(double x) const {
    const double span = x_hi > x_lo ? x_hi - x_lo : 1.0;
    return kLeft + (x - x_lo) / span * (kWidth - kLeft - kRight);
  }
  double py(double y) const {
    const double span = y_hi > y_lo ? y_hi - y_lo : 1.0;
    return kHeight - kBottom - (y - y_lo) / span * (kHeight - kTop - kBottom);
  }
};

inline std::string num(double v) {
  std::ostringstream s;
  s.setf(std::ios::fixed);
  s.precision(2);
  s << v;
  return s.str();
}

inline std::string frame(const Frame& f, const std::string& title,
                        const std::string& x_label, const std::string& y_label) {
  std::string o;
  o += "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + num(Frame::kWidth) +
       "\" height=\"" + num(Frame::kHeight) + "\" font-family=\"sans-serif\" " +
       "font-size=\"12\">\n";
  o += "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  o += "<text x=\"" + num(Frame::kWidth / 2) + "\" y=\"24\" text-anchor=\"middle\" " +
       "font-size=\"14\">" + title + "</text>\n";
  const double x0 = Frame::kLeft;
  const double x1 = Frame::kWidth - Frame::kRight;
  const double y0 = Frame::kHeight - Frame::kBottom;
  const double y1 = Frame::kTop;
  o += "<line x1=\"" + num(x0) + "\" y1=\"" + num(y0) + "\" x2=\"" + num(x1) +
       "\" y2=\"" + num(y0) + "\" stroke=\"black\"/>\n";
  o += "<line x1=\"" + num(x0) + "\" y1=\"" + num(y0) + "\" x2=\"" + num(x0) +
       "\" y2=\"" + num(y1) + "\" stroke=\"black\"/>\n";
  for (int i = 0; i <= 4; ++i) {
    const double xv = f.x_lo + (f.x_hi - f.x_lo) * i / 4.0;
    const double yv = f.y_lo + (f.y_hi - f.y_lo) * i / 4.0;
    o += "<text x=\"" + num(f.px(xv)) + "\" y=\"" + num(y0 + 16) +
         "\" text-anchor=\"middle\">" + num(xv) + "</text>\n";
    o += "<text x=\"" + num(x0 - 6) + "\" y=\"" + num(f.py(yv) + 4) +
         "\" text-anchor=\"end\">" + num(yv) + "</text>\n";
  }
  o += "<text x=\"" + num((x0 + x1) / 2) + "\" y=\"" + num(Frame::kHeight - 16) +
       "\" text-anchor=\"middle\">" + x_label + "</text>\n";
  o += "<text transform=\"translate(18," + num((y0 + y1) / 2) +
       ") rotate(-90)\" text-anchor=\"middle\">" + y_label + "</text>\n";
  return o;
}

inline std::string scatter(std::span<const double> xs, std::span<const double> ys,
                           const std::string& title, const std::string& x_label,
                           const std::string& y_label) {
  auto [xl, xh] = std::minmax_element(xs.begin(), xs.end());
  auto [yl, yh] = std::minmax_element(ys.begin(), ys.end());
  Frame f{*xl, *xh, *yl, *yh};
  std::string o = frame(f, title, x_label, y_label);
  for (std::size_t i = 0; i < xs.size(); ++i) {
    o += "<circle cx=\"" + num(f.px(xs[i])) + "\" cy=\"" + num(f.py(ys[i])) +
         "\" r=\"2.5\" fill=\"steelblue\" fill-opacity=\"0.6\"/>\n";
  }
  return o + "</svg>\n";
}

inline std::string bars(std::span<const HistogramBin> bins,
                        const std::string& title, const std::string& x_label) {
  std::size_t top = 1;
  for (const auto& b : bins) top = std::max(top, b.count);
  Frame f{bins.front().lo, bins.back().hi, 0.0, static_cast<double>(top)};
  std::string o = frame(f, title, x_label, "count");
  for (const auto& b : bins) {
    const double x = f.px(b.lo);
    const double w = f.px(b.hi) - x;
    const double y = f.py(static_cast<double>(b.count));
    o += "<rect x=\"" + num(x) + "\" y=\"" + num(y) + "\" width=\"" +
         num(std::max(w - 1.0, 0.5)) + "\" height=\"" + num(f.py(0) - y) +
         "\" fill=\"steelblue\"/>\n";
  }
  return o + "</svg>\n";
}

}  // namespace svg

/// Everything the three plots need. Vectors of one plot must be aligned.
struct PlotData {
  std::vector<double> calibrated_review_scores;  // posterior mean per review
  std::vector<PaperId> papers;
  std::vector<double> paper_calibrated;  // aggregated calibrated score
  std::vector<double> acceptance;        // acceptance probability
  std::vector<PaperId> meta_papers;
  std::vector<double> meta_original;
  std::vector<double> meta_calibrated;
  std::size_t bins = 20;
};

/// Writes calibrated_histogram, acceptance_probability and
/// meta_calibration as .csv + .svg into `dir`; returns the written paths.
inline std::vector<std::filesystem::path> emit_plots(
    const PlotData& d, const std::filesystem::path& dir) {
  auto require = [](bool ok, const char* what) {
    if (!ok) throw Error(std::string("plots: missing or misaligned column ") + what);
  };
  require(!d.calibrated_review_scores.empty(), "calibrated_review_scores");
  require(!d.papers.empty() && d.paper_calibrated.size() == d.papers.size(),
          "paper_calibrated");
  require(d.acceptance.size() == d.papers.size(), "acceptance");
  require(!d.meta_papers.empty() && d.meta_original.size() == d.meta_papers.size(),
          "meta_original");
  require(d.meta_calibrated.size() == d.meta_papers.size(), "meta_calibrated");

  std::vector<std::filesystem::path> written;
  auto put = [&](const std::string& name, const std::string& content) {
    write_atomic(dir / name, content);
    written.push_back(dir / name);
  };

  const auto bins = histogram(d.calibrated_review_scores, d.bins);
  {
    std::string c;
    c += "# histogram of bias-removed review scores (posterior mean per review)\n";
    c += "# x: centre of an equal-width bin of calibrated scores; "
         "y: number of reviews in it\n";
    csv::write_row(c, {"bin_center", "count"});
    for (const auto& b : bins) {
      csv::write_row(c, {format_double(0.5 * (b.lo + b.hi)),
                         std::to_string(b.count)});
    }
    put("calibrated_histogram.csv", c);
    put("calibrated_histogram.svg",
        svg::bars(bins, "Calibrated review scores", "calibrated score"));
  }
  {
    std::string c;
    c += "# per-paper acceptance probability vs aggregated calibrated reviewer "
         "score\n";
    c += "# x: calibrated_score; y: acceptance_probability in [0, 1]; "
         "rows in paper id order\n";
    csv::write_row(c, {"calibrated_score", "acceptance_probability"});
    for (std::size_t i = 0; i < d.papers.size(); ++i) {
      csv::write_row(c, {format_double(d.paper_calibrated[i]),
                         format_double(d.acceptance[i])});
    }
    put("acceptance_probability.csv", c);
    put("acceptance_probability.svg",
        svg::scatter(d.paper_calibrated, d.acceptance, "Acceptance probability",
                     "calibrated reviewer score", "probability"));
  }
  {
    std::string c;
    c += "# original vs calibrated meta-reviewer score per paper\n";
    c += "# x: original (mean recommendation weight); y: calibrated; "
         "rows in paper id order\n";
    csv::write_row(c, {"original", "calibrated"});
    for (std::size_t i = 0; i < d.meta_papers.size(); ++i) {
      csv::write_row(c, {format_double(d.meta_original[i]),
                         format_double(d.meta_calibrated[i])});
    }
    put("meta_calibration.csv", c);
    put("meta_calibration.svg",
        svg::scatter(d.meta_original, d.meta_calibrated,
                     "Meta-reviewer scores", "original", "calibrated"));
  }
  return written;
}

}  // namespace revcal
