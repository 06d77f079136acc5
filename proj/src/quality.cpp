#include "aquaghost/quality.hpp"

#include <map>
#include <tuple>

namespace aquaghost {

std::string CellLabel::id() const {
  return std::string(to_string(source)) + "-r" + std::to_string(resolution) + "-" +
         std::string(to_string(solver)) + "-s" + std::to_string(seed);
}

QualityReport score(const GridXd& truth, const GridXd& recon, const CellLabel& label) {
  QualityReport report;
  report.label = label;
  report.mse = mse(truth, recon);
  report.psnr = psnr(truth, recon);
  report.ssim = (truth.rows() >= 11 && truth.cols() >= 11) ? ssim(truth, recon)
                                                           : std::numeric_limits<double>::quiet_NaN();
  return report;
}

DeltaStats delta_stats(const std::vector<PairDelta>& pairs) {
  DeltaStats s;
  s.pairs = static_cast<Index>(pairs.size());
  if (pairs.empty()) return s;
  const double n = static_cast<double>(pairs.size());
  double wins = 0.0;
  for (const auto& p : pairs) {
    const double d = p.delta_psnr();
    wins += d > 0.0 ? 1.0 : (d == 0.0 ? 0.5 : 0.0);
    s.mean_delta_psnr += d;
    s.mean_delta_ssim += p.delta_ssim();
  }
  s.win_rate = wins / n;
  s.mean_delta_psnr /= n;
  s.mean_delta_ssim /= n;
  if (pairs.size() > 1) {
    double vp = 0.0;
    double vs = 0.0;
    for (const auto& p : pairs) {
      vp += (p.delta_psnr() - s.mean_delta_psnr) * (p.delta_psnr() - s.mean_delta_psnr);
      vs += (p.delta_ssim() - s.mean_delta_ssim) * (p.delta_ssim() - s.mean_delta_ssim);
    }
    s.sd_delta_psnr = std::sqrt(vp / (n - 1.0));
    s.sd_delta_ssim = std::sqrt(vs / (n - 1.0));
  }
  return s;
}

ComparisonSummary compare_cells(const std::vector<QualityReport>& reports, SourceKind treated) {
  using Key = std::tuple<Index, int, std::uint64_t>;
  const auto key = [](const CellLabel& l) { return Key{l.resolution, static_cast<int>(l.solver), l.seed}; };

  std::map<Key, const QualityReport*> treated_by_key;
  std::map<Key, const QualityReport*> control_by_key;
  for (const auto& r : reports) {
    auto& bucket = r.label.source == treated ? treated_by_key : control_by_key;
    if (!bucket.emplace(key(r.label), &r).second) {
      throw Error(ErrorCode::PairingError, "duplicate cell " + r.label.id());
    }
  }
  for (const auto& [k, r] : control_by_key) {
    if (!treated_by_key.contains(k)) throw Error(ErrorCode::PairingError, "no partner for " + r->label.id());
  }

  ComparisonSummary out;
  out.treated = treated;
  std::vector<std::pair<Index, SolverKind>> group_order;
  std::map<std::pair<Index, int>, std::vector<PairDelta>> grouped;
  for (const auto& r : reports) {
    if (r.label.source != treated) continue;
    const auto it = control_by_key.find(key(r.label));
    if (it == control_by_key.end()) throw Error(ErrorCode::PairingError, "no partner for " + r.label.id());
    PairDelta p;
    p.resolution = r.label.resolution;
    p.solver = r.label.solver;
    p.seed = r.label.seed;
    p.psnr_treated = r.psnr;
    p.psnr_control = it->second->psnr;
    p.ssim_treated = r.ssim;
    p.ssim_control = it->second->ssim;
    out.pairs.push_back(p);
    const auto gk = std::make_pair(p.resolution, static_cast<int>(p.solver));
    if (!grouped.contains(gk)) group_order.emplace_back(p.resolution, p.solver);
    grouped[gk].push_back(p);
  }
  for (const auto& [res, solver] : group_order) {
    out.groups.push_back({res, solver, delta_stats(grouped[{res, static_cast<int>(solver)}])});
  }
  out.overall = delta_stats(out.pairs);
  return out;
}

}  // namespace aquaghost
