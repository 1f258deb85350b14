#include "ywb/report.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

namespace ywb {

namespace {

void open_out(std::ofstream& out, const std::string& path) {
  const std::filesystem::path p(path);
  if (p.has_parent_path()) std::filesystem::create_directories(p.parent_path());
  out.open(path, std::ios::binary);  // binary: byte-identical regeneration
  require(out.good(), "report: cannot open '" + path + "' for writing");
}

std::string num(double v) {
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

std::string num_short(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%g", v);
  return buf;
}

}  // namespace

void write_campaign_curve_csv(const std::string& path, const CampaignResult& campaign) {
  std::ofstream out;
  open_out(out, path);
  out << "epoch,mean_cost,min_cost,max_cost,mean_norm,min_norm,max_norm\n";
  const auto band = campaign.normalized_band();
  // Raw-cost band over the same completed runs.
  std::vector<const TrainLog*> done;
  for (const SeedRun& r : campaign.runs)
    if (r.ok) done.push_back(&r.log);
  for (std::size_t e = 0; e < band.size(); ++e) {
    double mean = 0.0, lo = 0.0, hi = 0.0;
    if (!done.empty()) {
      lo = hi = done[0]->records[e].test_cost;
      for (const TrainLog* log : done) {
        const double c = log->records[e].test_cost;
        mean += c;
        lo = std::min(lo, c);
        hi = std::max(hi, c);
      }
      mean /= static_cast<double>(done.size());
    }
    out << e << ',' << num(mean) << ',' << num(lo) << ',' << num(hi) << ',' << num(band[e][0])
        << ',' << num(band[e][1]) << ',' << num(band[e][2]) << '\n';
  }
  require(out.good(), "report: write to '" + path + "' failed");
}

void write_robustness_csv(const std::string& path, const std::vector<RobustnessRow>& rows) {
  std::ofstream out;
  open_out(out, path);
  out << "policy_id,gamma,epsilon,mean_norm_cost,mean_deviation,criterion_hit\n";
  for (const RobustnessRow& r : rows) {
    out << r.policy_id << ',' << num(r.gamma) << ',' << num(r.epsilon) << ','
        << num(r.mean_norm_cost) << ',' << num(r.mean_deviation) << ','
        << (r.criterion_hit ? 1 : 0) << '\n';
  }
  require(out.good(), "report: write to '" + path + "' failed");
}

void write_critical_csv(const std::string& path, const std::vector<CriticalRow>& rows) {
  std::ofstream out;
  open_out(out, path);
  out << "policy_id,gamma,seeds,mean_critical,min_critical,max_critical,censored_low,"
         "censored_high\n";
  for (const CriticalRow& r : rows) {
    double mean = 0.0, lo = 0.0, hi = 0.0;
    if (!r.per_seed.empty()) {
      lo = hi = r.per_seed[0];
      for (double v : r.per_seed) {
        mean += v;
        lo = std::min(lo, v);
        hi = std::max(hi, v);
      }
      mean /= static_cast<double>(r.per_seed.size());
    }
    out << r.policy_id << ',' << num(r.gamma) << ',' << r.per_seed.size() << ',' << num(mean) << ','
        << num(lo) << ',' << num(hi) << ',' << r.censored_low << ',' << r.censored_high << '\n';
  }
  require(out.good(), "report: write to '" + path + "' failed");
}

// ----------------------------------------------------------------------------
// SVG chart
// ----------------------------------------------------------------------------

namespace {

constexpr double kW = 720.0, kH = 480.0;
constexpr double kL = 70.0, kR = 20.0, kT = 40.0, kB = 50.0;

const char* const kPalette[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd",
                                "#ff7f0e", "#8c564b", "#17becf", "#7f7f7f"};

std::string coord(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.2f", v);
  return buf;
}

}  // namespace

void write_line_chart_svg(const std::string& path, const std::vector<ChartSeries>& series,
                          const ChartOptions& opt) {
  require(!series.empty(), "report: chart needs at least one series");
  double xmin = 0, xmax = 1, ymin = 0, ymax = 1;
  bool first = true;
  for (const ChartSeries& s : series) {
    require(s.x.size() == s.y.size(), "report: series x/y length mismatch");
    for (std::size_t i = 0; i < s.x.size(); ++i) {
      double yv = s.y[i];
      if (opt.log_y && yv <= 0.0) continue;
      if (!std::isfinite(s.x[i]) || !std::isfinite(yv)) continue;
      if (opt.log_y) yv = std::log10(yv);
      if (first) {
        xmin = xmax = s.x[i];
        ymin = ymax = yv;
        first = false;
      } else {
        xmin = std::min(xmin, s.x[i]);
        xmax = std::max(xmax, s.x[i]);
        ymin = std::min(ymin, yv);
        ymax = std::max(ymax, yv);
      }
    }
  }
  if (xmax <= xmin) xmax = xmin + 1.0;
  if (ymax <= ymin) ymax = ymin + 1.0;
  const double px = 0.03 * (ymax - ymin);
  ymin -= px;
  ymax += px;

  auto X = [&](double v) { return kL + (v - xmin) / (xmax - xmin) * (kW - kL - kR); };
  auto Y = [&](double v) {
    if (opt.log_y) v = std::log10(std::max(v, 1e-300));
    return kH - kB - (v - ymin) / (ymax - ymin) * (kH - kT - kB);
  };

  std::ofstream out;
  open_out(out, path);
  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kW << "\" height=\"" << kH
      << "\" viewBox=\"0 0 " << kW << ' ' << kH << "\">\n";
  out << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  out << "<text x=\"" << kW / 2 << "\" y=\"24\" text-anchor=\"middle\" font-size=\"16\" "
      << "font-family=\"sans-serif\">" << opt.title << "</text>\n";

  // Axes.
  out << "<line x1=\"" << kL << "\" y1=\"" << kH - kB << "\" x2=\"" << kW - kR << "\" y2=\""
      << kH - kB << "\" stroke=\"black\"/>\n";
  out << "<line x1=\"" << kL << "\" y1=\"" << kT << "\" x2=\"" << kL << "\" y2=\"" << kH - kB
      << "\" stroke=\"black\"/>\n";
  for (int k = 0; k <= 5; ++k) {
    const double fx = xmin + (xmax - xmin) * k / 5.0;
    const double fy = ymin + (ymax - ymin) * k / 5.0;
    const double sx = X(fx);
    const double sy = kH - kB - (fy - ymin) / (ymax - ymin) * (kH - kT - kB);
    out << "<line x1=\"" << coord(sx) << "\" y1=\"" << kH - kB << "\" x2=\"" << coord(sx)
        << "\" y2=\"" << kH - kB + 5 << "\" stroke=\"black\"/>\n";
    out << "<text x=\"" << coord(sx) << "\" y=\"" << kH - kB + 18
        << "\" text-anchor=\"middle\" font-size=\"11\" font-family=\"sans-serif\">"
        << num_short(fx) << "</text>\n";
    out << "<line x1=\"" << kL - 5 << "\" y1=\"" << coord(sy) << "\" x2=\"" << kL << "\" y2=\""
        << coord(sy) << "\" stroke=\"black\"/>\n";
    const double label = opt.log_y ? std::pow(10.0, fy) : fy;
    out << "<text x=\"" << kL - 8 << "\" y=\"" << coord(sy + 4)
        << "\" text-anchor=\"end\" font-size=\"11\" font-family=\"sans-serif\">"
        << num_short(label) << "</text>\n";
  }
  out << "<text x=\"" << (kL + kW - kR) / 2 << "\" y=\"" << kH - 12
      << "\" text-anchor=\"middle\" font-size=\"13\" font-family=\"sans-serif\">" << opt.x_label
      << "</text>\n";
  out << "<text x=\"16\" y=\"" << (kT + kH - kB) / 2
      << "\" text-anchor=\"middle\" font-size=\"13\" font-family=\"sans-serif\" "
      << "transform=\"rotate(-90 16 " << (kT + kH - kB) / 2 << ")\">" << opt.y_label
      << "</text>\n";

  // Series.
  for (std::size_t s = 0; s < series.size(); ++s) {
    const char* color = kPalette[s % (sizeof(kPalette) / sizeof(kPalette[0]))];
    out << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"1.5\" points=\"";
    for (std::size_t i = 0; i < series[s].x.size(); ++i) {
      const double yv = series[s].y[i];
      if (opt.log_y && yv <= 0.0) continue;
      if (!std::isfinite(series[s].x[i]) || !std::isfinite(yv)) continue;
      out << coord(X(series[s].x[i])) << ',' << coord(Y(yv)) << ' ';
    }
    out << "\"/>\n";
    const double ly = kT + 16.0 * static_cast<double>(s);
    out << "<line x1=\"" << kW - kR - 150 << "\" y1=\"" << coord(ly) << "\" x2=\""
        << kW - kR - 130 << "\" y2=\"" << coord(ly) << "\" stroke=\"" << color
        << "\" stroke-width=\"2\"/>\n";
    out << "<text x=\"" << kW - kR - 125 << "\" y=\"" << coord(ly + 4)
        << "\" font-size=\"11\" font-family=\"sans-serif\">" << series[s].name << "</text>\n";
  }
  out << "</svg>\n";
  require(out.good(), "report: write to '" + path + "' failed");
}

void write_campaign_chart_svg(const std::string& path,
                              const std::vector<std::pair<std::string, CampaignResult>>& campaigns,
                              const std::string& title) {
  std::vector<ChartSeries> series;
  for (const auto& [name, campaign] : campaigns) {
    ChartSeries s;
    s.name = name;
    const auto band = campaign.normalized_band();
    for (std::size_t e = 0; e < band.size(); ++e) {
      s.x.push_back(static_cast<double>(e));
      s.y.push_back(band[e][0]);
    }
    series.push_back(std::move(s));
  }
  ChartOptions opt;
  opt.title = title;
  opt.x_label = "epoch";
  opt.y_label = "normalized test cost";
  write_line_chart_svg(path, series, opt);
}

}  // namespace ywb
