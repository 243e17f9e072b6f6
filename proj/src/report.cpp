#include "report.hpp"

#include <algorithm>
#include <array>
#include <cstdio>
#include <sstream>

namespace facelift::detail {

namespace {

constexpr std::array<const char*, kNumElements> kColors = {
    "#7f7f7f", "#9fd3f0", "#2e8b3a", "#b0643c", "#3c3c3c", "#e0c020",
    "#e0457b", "#3050c0", "#9b59b6", "#d8cfb8", "#8b6f47", "#f5f5f5"};

std::string esc(std::string_view s) {
  std::string out;
  for (const char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

std::string fmt(double v, int digits = 3) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

std::string pct(double v) { return fmt(100.0 * v, 1) + "%"; }

// One rect per horizontal run of equal labels.
std::string raster_svg(const Scene& s, int cell = 3) {
  std::ostringstream o;
  o << "<svg class=\"raster\" xmlns=\"http://www.w3.org/2000/svg\" width=\"" << s.width() * cell
    << "\" height=\"" << s.height() * cell << "\" shape-rendering=\"crispEdges\">";
  for (int r = 0; r < s.height(); ++r) {
    int c = 0;
    while (c < s.width()) {
      const auto v = s.at(r, c);
      int e = c + 1;
      while (e < s.width() && s.at(r, e) == v) ++e;
      o << "<rect x=\"" << c * cell << "\" y=\"" << r * cell << "\" width=\"" << (e - c) * cell
        << "\" height=\"" << cell << "\" fill=\"" << kColors[v] << "\"/>";
      c = e;
    }
  }
  o << "</svg>";
  return o.str();
}

struct Series {
  std::string name;
  std::vector<double> values;
  const char* color;
};

std::string bar_chart(const std::vector<std::string>& categories, const std::vector<Series>& series) {
  const int bar = 14, gap = 10, h = 120, pad = 20;
  double top = 1e-12;
  for (const auto& s : series)
    for (const double v : s.values) top = std::max(top, v);
  const int group = static_cast<int>(series.size()) * bar + gap;
  const int width = pad + static_cast<int>(categories.size()) * group + pad;
  std::ostringstream o;
  o << "<svg class=\"chart\" xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width
    << "\" height=\"" << h + 40 << "\">";
  for (std::size_t c = 0; c < categories.size(); ++c) {
    const int x0 = pad + static_cast<int>(c) * group;
    for (std::size_t k = 0; k < series.size(); ++k) {
      const double v = c < series[k].values.size() ? series[k].values[c] : 0.0;
      const int bh = static_cast<int>(v / top * h + 0.5);
      o << "<rect x=\"" << x0 + static_cast<int>(k) * bar << "\" y=\"" << 10 + h - bh
        << "\" width=\"" << bar - 2 << "\" height=\"" << bh << "\" fill=\"" << series[k].color
        << "\"><title>" << esc(series[k].name) << ": " << fmt(v, 0) << "</title></rect>";
    }
    o << "<text x=\"" << x0 << "\" y=\"" << h + 28 << "\" font-size=\"10\">"
      << esc(categories[c]) << "</text>";
  }
  o << "</svg><div class=\"chart-key\">";
  for (const auto& s : series) {
    o << "<span><i style=\"background:" << s.color << "\"></i>" << esc(s.name) << "</span>";
  }
  o << "</div>";
  return o.str();
}

std::vector<double> as_doubles(const Json& a) {
  std::vector<double> v;
  for (const auto& x : a) v.push_back(x.get<double>());
  return v;
}

void gaps(std::ostringstream& o, const ReportInputs& in) {
  if (in.missing.empty()) return;
  o << "<section class=\"gaps\"><h2>Gaps</h2><p>These artifacts were not found; the sections "
       "that depend on them are marked as unavailable.</p><ul>";
  for (const auto& m : in.missing) o << "<li class=\"gap\">" << esc(m) << "</li>";
  o << "</ul></section>\n";
}

void unavailable(std::ostringstream& o, const char* stage) {
  o << "<p class=\"gap\">Not available: run <code>facelift " << stage << "</code>.</p>";
}

void legend(std::ostringstream& o) {
  o << "<section><h2>Legend</h2><ul class=\"legend\">";
  for (int i = 0; i < kNumElements; ++i) {
    const auto e = static_cast<Element>(i);
    o << "<li class=\"legend-entry\"><i style=\"background:" << kColors[static_cast<std::size_t>(i)]
      << "\"></i>" << esc(element_name(e)) << "</li>";
  }
  o << "</ul></section>\n";
}

void ratings(std::ostringstream& o, const ReportInputs& in) {
  o << "<section><h2>Corpus and ratings</h2>";
  if (!in.partition) {
    unavailable(o, "rank");
  } else {
    const auto& p = *in.partition;
    o << "<table><tr><th>Scenes rated</th><th>Beautiful</th><th>Ugly</th><th>Discarded</th>"
         "<th>Minimum judgments</th></tr><tr><td>"
      << p.at("scores").size() << "</td><td>" << p.at("beautiful").size() << "</td><td>"
      << p.at("ugly").size() << "</td><td>" << p.at("discarded").size() << "</td><td>"
      << p.at("min_judgments").get<int>() << "</td></tr></table>";
  }
  o << "</section>\n";
}

void augmentation(std::ostringstream& o, const ReportInputs& in) {
  o << "<section><h2>Augmentation</h2>";
  if (!in.augmentation) {
    unavailable(o, "curate");
    o << "</section>\n";
    return;
  }
  std::size_t rotated = 0, translated = 0, taken = 0;
  for (const auto& e : in.augmentation->at("entries")) {
    if (e.at("kind").get<std::string>() == "rotated") {
      ++rotated;
    } else {
      ++translated;
      taken += e.at("taken").get<bool>();
    }
  }
  o << "<table><tr><th>Rotated</th><th>Translated</th><th>Kept by filter</th><th>Kept fraction</th>"
       "<th>Similarity threshold</th></tr><tr><td>"
    << rotated << "</td><td>" << translated << "</td><td>" << taken << "</td><td>"
    << (translated ? pct(static_cast<double>(taken) / static_cast<double>(translated)) : "-")
    << "</td><td>" << fmt(in.augmentation->at("threshold").get<double>(), 4) << "</td></tr></table>";
  if (in.propensity_csv) {
    std::istringstream csv(*in.propensity_csv);
    std::string line;
    std::vector<std::tuple<double, std::string, std::string>> rows;
    while (std::getline(csv, line)) {
      if (line.empty() || line[0] == '#' || line.rfind("tag,", 0) == 0) continue;
      const auto a = line.find(','), b = line.find(',', a + 1);
      rows.emplace_back(std::stod(line.substr(b + 1)), line.substr(0, a), line.substr(a + 1, b - a - 1));
    }
    std::sort(rows.begin(), rows.end(), [](const auto& x, const auto& y) {
      return std::get<0>(x) != std::get<0>(y) ? std::get<0>(x) > std::get<0>(y) : std::get<1>(x) < std::get<1>(y);
    });
    o << "<h3>Tag propensity (kept minus filtered)</h3><table><tr><th>Tag</th><th>Category</th>"
         "<th>Propensity</th></tr>";
    for (const auto& [v, tag, cat] : rows) {
      o << "<tr><td>" << esc(tag) << "</td><td>" << esc(cat) << "</td><td>" << fmt(v) << "</td></tr>";
    }
    o << "</table>";
  }
  o << "</section>\n";
}

void training(std::ostringstream& o, const ReportInputs& in) {
  o << "<section><h2>Training</h2>";
  if (!in.training) {
    unavailable(o, "train");
    o << "</section>\n";
    return;
  }
  const auto& t = *in.training;
  o << "<h3>Accuracy ladder</h3><table class=\"ladder\"><tr><th>Augmentation</th><th>Training "
       "scenes</th><th>Train accuracy</th><th>Held-out accuracy</th></tr>";
  for (const auto& e : t.at("ladder")) {
    o << "<tr class=\"ladder-row\"><td>" << esc(e.at("mode").get<std::string>()) << "</td><td>"
      << e.at("train_size").get<std::size_t>() << "</td><td>"
      << pct(e.at("train_accuracy").get<double>()) << "</td><td>"
      << pct(e.at("test_accuracy").get<double>()) << "</td></tr>";
  }
  o << "</table><p>Held-out set: " << t.at("test_size").get<std::size_t>()
    << " labelled originals, split by scene. The search classifier uses <code>"
    << esc(t.at("classifier").at("mode").get<std::string>()) << "</code>.</p>";
  const auto& g = t.at("generator");
  o << "<p>Generator reconstruction accuracy: " << pct(g.at("train_accuracy").get<double>())
    << " train, " << pct(g.at("heldout_accuracy").get<double>()) << " held-out.</p></section>\n";
}

void gallery(std::ostringstream& o, const ReportInputs& in) {
  o << "<section><h2>Beautification and uglification</h2>";
  if (in.records.empty()) {
    unavailable(o, "beautify");
    o << "</section>\n";
    return;
  }
  for (const char* dir : {"beautify", "uglify"}) {
    std::size_t n = 0, up = 0;
    double steps = 0, p0 = 0, p1 = 0;
    for (const auto& r : in.records) {
      if (r.at("direction").get<std::string>() != dir) continue;
      ++n;
      const double a = r.at("initialProbability").get<double>(), b = r.at("finalProbability").get<double>();
      up += b > a;
      p0 += a;
      p1 += b;
      steps += r.at("iterations").get<double>();
    }
    if (n == 0) continue;
    const double dn = static_cast<double>(n);
    o << "<p><b>" << dir << "</b>: " << n << " scenes; target-class probability rose for " << up
      << " (mean " << fmt(p0 / dn) << " to " << fmt(p1 / dn) << ") over a mean of "
      << fmt(steps / dn, 1) << " steps.</p>";
  }
  o << "<div class=\"gallery\">";
  for (const char* dir : {"beautify", "uglify"}) {
    int shown = 0;
    for (const auto& item : in.items) {
      if (shown >= in.gallery) break;
      if (item.record.at("direction").get<std::string>() != dir) continue;
      ++shown;
      const auto& ex = item.record.at("explanation");
      o << "<figure class=\"gallery-item\"><div class=\"triple\"><div>" << raster_svg(item.original)
        << "<span>" << esc(item.original.id()) << "</span></div><div>"
        << (item.templ ? raster_svg(*item.templ) : std::string("<em>template missing</em>"))
        << "<span>template</span></div><div>" << raster_svg(item.retrieved) << "<span>"
        << esc(item.retrieved.id()) << "</span></div></div><figcaption>" << dir << ": ";
      int k = 0;
      for (const auto& d : ex.at("elementDeltas")) {
        if (k++ == 3) break;
        const double v = d.at("delta").get<double>();
        o << esc(d.at("element").get<std::string>()) << ' ' << (v >= 0 ? "+" : "") << pct(v) << "; ";
      }
      const auto tags = [&](const char* key, const char* label) {
        if (ex.at(key).empty()) return;
        o << label;
        bool first = true;
        for (const auto& t : ex.at(key)) {
          o << (first ? "" : ", ") << esc(t.get<std::string>());
          first = false;
        }
        o << "; ";
      };
      tags("tagsAdded", "gained ");
      tags("tagsRemoved", "lost ");
      o << "</figcaption></figure>";
    }
  }
  o << "</div></section>\n";
}

void metrics(std::ostringstream& o, const ReportInputs& in) {
  o << "<section><h2>Urban elements</h2>";
  if (!in.summary) {
    unavailable(o, "metrics");
    o << "</section>\n";
    return;
  }
  const auto& sets = in.summary->at("sets");
  const std::vector<std::string> names = {"ugly-original", "beautified", "beautiful-original", "uglified"};
  o << "<table><tr><th>Set</th><th>Scenes</th><th>Walkable</th><th>Natural</th><th>Landmark</th>"
       "<th>Architectural</th><th>Unclassified</th><th>Tree</th><th>Sky</th><th>Complexity</th></tr>";
  for (const auto& n : names) {
    const auto& s = sets.at(n);
    const auto& t = s.at("taxonomy");
    o << "<tr><td>" << n << "</td><td>" << s.at("count").get<int>() << "</td><td>"
      << t.at("Walkable").get<int>() << "</td><td>" << t.at("Natural").get<int>() << "</td><td>"
      << t.at("Landmark").get<int>() << "</td><td>" << t.at("Architectural").get<int>() << "</td><td>"
      << t.at("unclassified").get<int>() << "</td><td>" << pct(s.at("mean_tree_fraction").get<double>())
      << "</td><td>" << pct(s.at("mean_sky_fraction").get<double>()) << "</td><td>"
      << fmt(s.at("mean_complexity").get<double>()) << "</td></tr>";
  }
  o << "</table>";
  const auto& d = in.summary->at("beautified_minus_uglified");
  o << "<p>Beautified minus uglified: Walkable tags " << d.at("walkable").get<int>()
    << ", tree fraction " << fmt(d.at("tree_fraction").get<double>()) << ", sky fraction "
    << fmt(d.at("sky_fraction").get<double>()) << ", complexity "
    << fmt(d.at("complexity").get<double>()) << " nats.</p>";

  std::vector<std::string> sky_bins, cx_bins;
  for (int i = 0; i < 6; ++i) {
    sky_bins.push_back(fmt(i / 6.0, 2) + "-" + fmt((i + 1) / 6.0, 2));
    cx_bins.push_back("bin " + std::to_string(i + 1));
  }
  o << "<h3>Sky fraction</h3>"
    << bar_chart(sky_bins, {{"beautified", as_doubles(sets.at("beautified").at("sky_bins")), "#2e8b3a"},
                            {"uglified", as_doubles(sets.at("uglified").at("sky_bins")), "#b0643c"}})
    << "<h3>Complexity (entropy, six equal bins over [0, ln 12])</h3>"
    << bar_chart(cx_bins, {{"beautified", as_doubles(sets.at("beautified").at("complexity_bins")), "#2e8b3a"},
                           {"uglified", as_doubles(sets.at("uglified").at("complexity_bins")), "#b0643c"}})
    << "</section>\n";
}

void regression(std::ostringstream& o, const ReportInputs& in) {
  o << "<section><h2>Element interactions</h2>";
  if (!in.regression) {
    unavailable(o, "analyze");
    o << "</section>\n";
    return;
  }
  o << "<table class=\"regression\"><tr><th>Pair</th><th>&beta;1</th><th>&beta;2</th><th>&beta;3</th>"
       "<th>&beta;1/4</th><th>&beta;2/4</th><th>&beta;3/4</th><th>Error rate</th></tr>";
  for (const auto& m : in.regression->at("models")) {
    const auto q = as_doubles(m.at("divide_by_four"));
    o << "<tr class=\"regression-row\"><td>" << esc(m.at("pair").get<std::string>()) << "</td><td>"
      << fmt(m.at("beta1").get<double>()) << "</td><td>" << fmt(m.at("beta2").get<double>())
      << "</td><td>" << fmt(m.at("beta3").get<double>()) << "</td><td>" << fmt(q[0], 4)
      << "</td><td>" << fmt(q[1], 4) << "</td><td>" << fmt(q[2], 4) << "</td><td>"
      << pct(m.at("error_rate").get<double>()) << (m.at("converged").get<bool>() ? "" : " (not converged)")
      << "</td></tr>";
  }
  o << "</table><p class=\"footnote\">Predictors are element shares in percentage points of the "
       "scene (" << in.regression->at("samples").get<std::size_t>()
    << " labelled scenes). &beta;/4 bounds the change in the probability of the beautiful class "
       "per percentage point; the interaction term &beta;3 is per product of percentage points.</p>"
       "</section>\n";
}

void evaluation(std::ostringstream& o, const ReportInputs& in) {
  o << "<section><h2>Simulated A/B evaluation</h2>";
  if (!in.evaluation) {
    unavailable(o, "evaluate");
    o << "</section>\n";
    return;
  }
  const auto& e = *in.evaluation;
  o << "<p>Correct pick rate: <b>" << pct(e.at("correct_pick_rate").get<double>()) << "</b> over "
    << e.at("pairs_judged").get<std::size_t>() << " pairs (beautification "
    << pct(e.at("beautify_rate").get<double>()) << ", uglification "
    << pct(e.at("uglify_rate").get<double>()) << "), " << e.at("votes_per_pair").get<int>()
    << " votes per pair.</p><p class=\"footnote\">Raters are simulated: each perceives the hidden "
       "aesthetic score of both scenes plus Gaussian noise with standard deviation "
    << fmt(e.at("rater_noise").get<double>(), 2)
    << ", and the majority vote decides. No people were involved.</p></section>\n";
}

}  // namespace

const char* element_color(Element e) { return kColors[static_cast<std::size_t>(e)]; }

std::string render_report(const ReportInputs& in) {
  std::ostringstream o;
  o << "<!DOCTYPE html>\n<html lang=\"en\"><head><meta charset=\"utf-8\">"
    << "<meta name=\"facelift-fingerprint\" content=\"" << esc(in.fingerprint) << "\">"
    << "<title>Facelift report</title><style>"
       "body{font-family:sans-serif;max-width:1100px;margin:2em auto;color:#222}"
       "table{border-collapse:collapse;margin:.5em 0}td,th{border:1px solid #ccc;padding:3px 8px;"
       "text-align:right}td:first-child,th:first-child{text-align:left}"
       ".legend{list-style:none;display:flex;flex-wrap:wrap;gap:12px;padding:0}"
       ".legend i,.chart-key i{display:inline-block;width:12px;height:12px;margin-right:4px;"
       "border:1px solid #999}.chart-key span{margin-right:12px}"
       ".gallery{display:flex;flex-wrap:wrap;gap:16px}.gallery-item{margin:0;width:320px}"
       ".triple{display:flex;gap:4px}.triple div{display:flex;flex-direction:column;font-size:10px}"
       "figcaption{font-size:11px}.gap{color:#a00}.footnote{font-size:12px;color:#555}"
       "</style></head><body>\n";
  o << "<h1>Facelift report</h1><p>Configuration fingerprint <code>" << esc(in.fingerprint)
    << "</code>, seed " << in.config.at("seed").get<std::uint64_t>() << ".</p>\n";
  gaps(o, in);
  legend(o);
  ratings(o, in);
  augmentation(o, in);
  training(o, in);
  gallery(o, in);
  metrics(o, in);
  regression(o, in);
  evaluation(o, in);
  o << "<details><summary>Configuration</summary><pre>" << esc(in.config.dump(2))
    << "</pre></details>\n</body></html>\n";
  return o.str();
}

}  // namespace facelift::detail
