#include "facelift/ranking.hpp"

#include <algorithm>
#include <cmath>
#include <iostream>
#include <numbers>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

#include "facelift/rng.hpp"

namespace facelift {

std::string_view class_name(ClassLabel c) {
  return c == ClassLabel::Beautiful ? "beautiful" : "ugly";
}

void TrueSkillConfig::validate() const {
  if (!(sigma0 > 0.0) || !(beta > 0.0) || !(tau >= 0.0) || !std::isfinite(mu0) ||
      !(draw_probability >= 0.0 && draw_probability < 1.0)) {
    throw std::invalid_argument("invalid TrueSkill configuration");
  }
}

namespace {

double normal_pdf(double t) { return std::exp(-0.5 * t * t) / std::sqrt(2.0 * std::numbers::pi); }
double normal_cdf(double t) { return 0.5 * std::erfc(-t / std::numbers::sqrt2); }

// Mean-shift factor of a Gaussian truncated to the win region.
double v_win(double t) {
  const double denom = normal_cdf(t);
  if (denom < 1e-300) return -t;
  return normal_pdf(t) / denom;
}

}  // namespace

std::pair<RatingState, RatingState> update(const RatingState& winner, const RatingState& loser,
                                           const TrueSkillConfig& cfg) {
  for (const double x : {winner.mu, winner.sigma, loser.mu, loser.sigma}) {
    if (!std::isfinite(x)) throw std::invalid_argument("TrueSkill update: non-finite rating");
  }
  if (!(winner.sigma > 0.0) || !(loser.sigma > 0.0)) {
    throw std::invalid_argument("TrueSkill update: sigma must be positive");
  }
  cfg.validate();

  const double var_w = winner.sigma * winner.sigma + cfg.tau * cfg.tau;
  const double var_l = loser.sigma * loser.sigma + cfg.tau * cfg.tau;
  const double c2 = 2.0 * cfg.beta * cfg.beta + var_w + var_l;
  const double c = std::sqrt(c2);
  const double t = (winner.mu - loser.mu) / c;
  const double v = v_win(t);
  const double w = v * (v + t);

  RatingState nw = winner;
  RatingState nl = loser;
  nw.mu = winner.mu + var_w / c * v;
  nl.mu = loser.mu - var_l / c * v;
  nw.sigma = std::sqrt(var_w * std::max(1.0 - var_w / c2 * w, 1e-12));
  nl.sigma = std::sqrt(var_l * std::max(1.0 - var_l / c2 * w, 1e-12));
  ++nw.judgments;
  ++nl.judgments;
  return {nw, nl};
}

std::map<std::string, RatingState> apply_judgments(const std::vector<std::string>& ids,
                                                   const std::vector<Judgment>& judgments,
                                                   const TrueSkillConfig& cfg) {
  std::map<std::string, RatingState> table;
  for (const auto& id : ids) table.emplace(id, RatingState::fresh(cfg));
  std::size_t draws = 0;
  for (const auto& j : judgments) {
    if (j.left == j.right) throw std::invalid_argument("judgment compares '" + j.left + "' with itself");
    auto l = table.find(j.left);
    auto r = table.find(j.right);
    if (l == table.end() || r == table.end()) {
      throw std::invalid_argument("judgment references unknown scene '" +
                                  (l == table.end() ? j.left : j.right) + "'");
    }
    if (j.outcome == Outcome::Draw) {
      ++draws;
      continue;
    }
    auto& win = j.outcome == Outcome::LeftWins ? l->second : r->second;
    auto& lose = j.outcome == Outcome::LeftWins ? r->second : l->second;
    std::tie(win, lose) = update(win, lose, cfg);
  }
  if (draws > 0) {
    std::cerr << "warning: skipped " << draws << " draw judgment(s)\n";
  }
  return table;
}

std::vector<std::string> rank_order(const std::map<std::string, ScoredScene>& scores,
                                    int min_judgments) {
  std::vector<std::pair<double, std::string>> eligible;
  for (const auto& [id, s] : scores) {
    if (s.judgments >= min_judgments) eligible.emplace_back(s.score, id);
  }
  std::sort(eligible.begin(), eligible.end());
  std::vector<std::string> out;
  out.reserve(eligible.size());
  for (auto& e : eligible) out.push_back(std::move(e.second));
  return out;
}

Partition partition(const std::map<std::string, ScoredScene>& scores, int min_judgments,
                    double lower, double upper) {
  if (!(lower >= 0.0 && lower < upper && upper <= 100.0)) {
    throw std::invalid_argument("partition: need 0 <= lower < upper <= 100");
  }
  Partition p;
  const auto order = rank_order(scores, min_judgments);
  const auto n = static_cast<double>(order.size());
  const auto n_ugly = static_cast<std::size_t>(std::lround(n * lower / 100.0));
  const auto n_beautiful = static_cast<std::size_t>(std::lround(n * (100.0 - upper) / 100.0));
  for (std::size_t i = 0; i < order.size(); ++i) {
    if (i < n_ugly) p.ugly.insert(order[i]);
    else if (i + n_beautiful >= order.size()) p.beautiful.insert(order[i]);
    else p.discarded.insert(order[i]);
  }
  for (const auto& [id, s] : scores) {
    if (s.judgments < min_judgments) p.discarded.insert(id);
  }
  return p;
}

std::vector<Judgment> simulate_judgments(const std::vector<Scene>& corpus,
                                         const OracleConfig& oracle, int pairs_per_scene,
                                         std::uint64_t seed) {
  if (corpus.size() < 2) throw std::invalid_argument("simulate_judgments: need >= 2 scenes");
  std::vector<double> truth;
  truth.reserve(corpus.size());
  for (const auto& s : corpus) truth.push_back(oracle_score_noise_free(oracle, s));

  Rng rng(mix_seed(seed, 0x7a7e));
  std::vector<std::size_t> perm(corpus.size());
  std::vector<Judgment> out;
  for (int round = 0; round < pairs_per_scene; ++round) {
    for (std::size_t i = 0; i < perm.size(); ++i) perm[i] = i;
    rng.shuffle(std::span<std::size_t>(perm));
    for (std::size_t k = 0; k + 1 < perm.size(); k += 2) {
      const std::size_t a = perm[k];
      const std::size_t b = perm[k + 1];
      const std::uint64_t rater = rng.next();
      Rng noise(rater);
      const double pa = truth[a] + oracle.noise_scale * noise.normal();
      const double pb = truth[b] + oracle.noise_scale * noise.normal();
      // The simulated crowd always makes a choice; exact ties go left.
      const Outcome o = pa >= pb ? Outcome::LeftWins : Outcome::RightWins;
      out.push_back({corpus[a].id(), corpus[b].id(), o, rater});
    }
  }
  return out;
}

namespace {

std::vector<double> average_ranks(const std::vector<double>& x) {
  std::vector<std::size_t> idx(x.size());
  for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
  std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return x[a] < x[b]; });
  std::vector<double> ranks(x.size());
  for (std::size_t i = 0; i < idx.size();) {
    std::size_t j = i;
    while (j + 1 < idx.size() && x[idx[j + 1]] == x[idx[i]]) ++j;
    const double r = 0.5 * static_cast<double>(i + j);
    for (std::size_t k = i; k <= j; ++k) ranks[idx[k]] = r;
    i = j + 1;
  }
  return ranks;
}

}  // namespace

double spearman(const std::vector<double>& a, const std::vector<double>& b) {
  if (a.size() != b.size() || a.size() < 2) throw std::invalid_argument("spearman: size mismatch");
  const auto ra = average_ranks(a);
  const auto rb = average_ranks(b);
  const double n = static_cast<double>(a.size());
  double ma = 0, mb = 0;
  for (std::size_t i = 0; i < ra.size(); ++i) {
    ma += ra[i];
    mb += rb[i];
  }
  ma /= n;
  mb /= n;
  double sab = 0, saa = 0, sbb = 0;
  for (std::size_t i = 0; i < ra.size(); ++i) {
    sab += (ra[i] - ma) * (rb[i] - mb);
    saa += (ra[i] - ma) * (ra[i] - ma);
    sbb += (rb[i] - mb) * (rb[i] - mb);
  }
  if (saa == 0.0 || sbb == 0.0) return 0.0;
  return sab / std::sqrt(saa * sbb);
}

// ---------------------------------------------------------------------------

std::string judgments_to_ndjson(const std::vector<Judgment>& js, const std::string& fingerprint) {
  std::ostringstream out;
  out << nlohmann::json{{"meta", {{"fingerprint", fingerprint}}}}.dump() << '\n';
  for (const auto& j : js) {
    const char* o = j.outcome == Outcome::LeftWins    ? "left"
                    : j.outcome == Outcome::RightWins ? "right"
                                                      : "draw";
    out << nlohmann::json{{"left", j.left}, {"right", j.right}, {"outcome", o}}.dump() << '\n';
  }
  return out.str();
}

std::vector<Judgment> judgments_from_ndjson(const std::string& text) {
  std::vector<Judgment> out;
  std::istringstream in(text);
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    const auto j = nlohmann::json::parse(line);
    if (j.contains("meta")) continue;
    Judgment jd;
    jd.left = j.at("left").get<std::string>();
    jd.right = j.at("right").get<std::string>();
    const auto o = j.at("outcome").get<std::string>();
    if (o == "left") jd.outcome = Outcome::LeftWins;
    else if (o == "right") jd.outcome = Outcome::RightWins;
    else if (o == "draw") jd.outcome = Outcome::Draw;
    else throw std::invalid_argument("judgments line " + std::to_string(lineno) + ": bad outcome");
    if (jd.left == jd.right) {
      throw std::invalid_argument("judgments line " + std::to_string(lineno) + ": left == right");
    }
    out.push_back(std::move(jd));
  }
  return out;
}

std::string ratings_to_csv(const std::map<std::string, RatingState>& ratings,
                           const std::string& fingerprint) {
  std::ostringstream out;
  out << "# fingerprint=" << fingerprint << '\n';
  out << "id,mu,sigma,score,judgments\n";
  char buf[160];
  for (const auto& [id, r] : ratings) {
    std::snprintf(buf, sizeof buf, ",%.17g,%.17g,%.17g,%d\n", r.mu, r.sigma, score(r), r.judgments);
    out << id << buf;
  }
  return out.str();
}

}  // namespace facelift
