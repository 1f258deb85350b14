#pragma once

#include <string>
#include <vector>

#include "ywb/ars.hpp"
#include "ywb/attack.hpp"
#include "ywb/common.hpp"

namespace ywb {

// ============================================================================
// Report writers: deterministic CSV and SVG artifacts.  Regenerating a report
// from the same inputs yields byte-identical files.
// ============================================================================

// Per-epoch learning-curve band over the completed seeds of a campaign.
// Columns: epoch, mean_cost, min_cost, max_cost, mean_norm, min_norm, max_norm.
void write_campaign_curve_csv(const std::string& path, const CampaignResult& campaign);

struct RobustnessRow {
  std::string policy_id;
  double gamma = std::numeric_limits<double>::infinity();
  double epsilon = 0.0;
  double mean_norm_cost = 0.0;
  double mean_deviation = 0.0;
  bool criterion_hit = false;
};

// Columns: policy_id, gamma, epsilon, mean_norm_cost, mean_deviation, criterion_hit.
void write_robustness_csv(const std::string& path, const std::vector<RobustnessRow>& rows);

struct CriticalRow {
  std::string policy_id;
  double gamma = std::numeric_limits<double>::infinity();
  std::vector<double> per_seed;  // critical budgets, one per seed
  int censored_low = 0;          // seeds hitting the criterion at the range floor
  int censored_high = 0;         // seeds immune through the expanded range
};

// One row per policy with mean and min/max error bars over seeds.
// Columns: policy_id, gamma, seeds, mean_critical, min_critical, max_critical,
//          censored_low, censored_high.
void write_critical_csv(const std::string& path, const std::vector<CriticalRow>& rows);

// Minimal line chart (polyline per series, fixed 720x480 canvas, axis ticks).
struct ChartSeries {
  std::string name;
  std::vector<double> x, y;
};

struct ChartOptions {
  std::string title, x_label, y_label;
  bool log_y = false;
};

void write_line_chart_svg(const std::string& path, const std::vector<ChartSeries>& series,
                          const ChartOptions& opt);

// Convenience: learning-curve chart (mean line per campaign label).
void write_campaign_chart_svg(const std::string& path,
                              const std::vector<std::pair<std::string, CampaignResult>>& campaigns,
                              const std::string& title);

}  // namespace ywb
