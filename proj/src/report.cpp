#include "jointrl/report.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <set>
#include <sstream>

namespace jointrl::cli {

namespace {

std::string fmt(double v, const char* spec = "%.6g") {
  char buf[64];
  std::snprintf(buf, sizeof buf, spec, v);
  return buf;
}

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : line) {
    if (c == ',') {
      out.push_back(cur);
      cur.clear();
    } else {
      cur += c;
    }
  }
  out.push_back(cur);
  return out;
}

// Minimal deterministic SVG line plot.
class SvgPlot {
 public:
  SvgPlot(std::string title, std::string x_label, std::string y_label)
      : title_(std::move(title)), x_label_(std::move(x_label)), y_label_(std::move(y_label)) {}

  void add_series(const std::string& name, std::vector<std::pair<double, double>> points) {
    series_.emplace_back(name, std::move(points));
  }

  void set_x_range(double lo, double hi) {
    x_lo_ = lo;
    x_hi_ = hi;
    fixed_x_ = true;
  }

  std::string render() const {
    const double width = 640, height = 400;
    const double ml = 64, mr = 150, mt = 36, mb = 44;
    double x_lo = fixed_x_ ? x_lo_ : 1e300, x_hi = fixed_x_ ? x_hi_ : -1e300;
    double y_lo = 1e300, y_hi = -1e300;
    for (const auto& [name, pts] : series_)
      for (auto [x, y] : pts) {
        if (!fixed_x_) {
          x_lo = std::min(x_lo, x);
          x_hi = std::max(x_hi, x);
        }
        y_lo = std::min(y_lo, y);
        y_hi = std::max(y_hi, y);
      }
    if (x_lo > x_hi) {
      x_lo = 0;
      x_hi = 1;
    }
    if (y_lo > y_hi) {
      y_lo = 0;
      y_hi = 1;
    }
    if (y_hi == y_lo) y_hi = y_lo + 1;
    if (x_hi == x_lo) x_hi = x_lo + 1;
    auto px = [&](double x) { return ml + (x - x_lo) / (x_hi - x_lo) * (width - ml - mr); };
    auto py = [&](double y) { return height - mb - (y - y_lo) / (y_hi - y_lo) * (height - mt - mb); };

    static const char* palette[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e",
                                    "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf"};
    std::ostringstream os;
    os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"640\" height=\"400\" "
          "viewBox=\"0 0 640 400\">\n";
    os << "<rect width=\"640\" height=\"400\" fill=\"white\"/>\n";
    os << "<text x=\"" << fmt(ml) << "\" y=\"22\" font-family=\"sans-serif\" font-size=\"14\">"
       << title_ << "</text>\n";
    // axes
    os << "<line x1=\"" << fmt(ml) << "\" y1=\"" << fmt(height - mb) << "\" x2=\""
       << fmt(width - mr) << "\" y2=\"" << fmt(height - mb) << "\" stroke=\"black\"/>\n";
    os << "<line x1=\"" << fmt(ml) << "\" y1=\"" << fmt(mt) << "\" x2=\"" << fmt(ml) << "\" y2=\""
       << fmt(height - mb) << "\" stroke=\"black\"/>\n";
    os << "<text x=\"" << fmt(ml) << "\" y=\"" << fmt(height - 12)
       << "\" font-family=\"sans-serif\" font-size=\"11\">" << fmt(x_lo) << "</text>\n";
    os << "<text x=\"" << fmt(width - mr) << "\" y=\"" << fmt(height - 12)
       << "\" text-anchor=\"end\" font-family=\"sans-serif\" font-size=\"11\">" << fmt(x_hi)
       << "</text>\n";
    os << "<text x=\"6\" y=\"" << fmt(height - mb) << "\" font-family=\"sans-serif\" "
          "font-size=\"11\">" << fmt(y_lo) << "</text>\n";
    os << "<text x=\"6\" y=\"" << fmt(mt + 10) << "\" font-family=\"sans-serif\" "
          "font-size=\"11\">" << fmt(y_hi) << "</text>\n";
    os << "<text x=\"" << fmt((ml + width - mr) / 2) << "\" y=\"" << fmt(height - 12)
       << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"11\">" << x_label_
       << "</text>\n";
    os << "<text x=\"14\" y=\"" << fmt(mt - 6) << "\" font-family=\"sans-serif\" "
          "font-size=\"11\">" << y_label_ << "</text>\n";
    size_t ci = 0;
    for (const auto& [name, pts] : series_) {
      const char* color = palette[ci % 10];
      if (!pts.empty()) {
        os << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"1.5\" points=\"";
        for (size_t i = 0; i < pts.size(); ++i)
          os << (i ? " " : "") << fmt(px(pts[i].first)) << "," << fmt(py(pts[i].second));
        os << "\"/>\n";
      }
      const double ly = mt + 16 + 16 * static_cast<double>(ci);
      os << "<line x1=\"" << fmt(width - mr + 8) << "\" y1=\"" << fmt(ly - 4) << "\" x2=\""
         << fmt(width - mr + 28) << "\" y2=\"" << fmt(ly - 4) << "\" stroke=\"" << color
         << "\" stroke-width=\"2\"/>\n";
      os << "<text x=\"" << fmt(width - mr + 34) << "\" y=\"" << fmt(ly)
         << "\" font-family=\"sans-serif\" font-size=\"11\">" << name << "</text>\n";
      ++ci;
    }
    os << "</svg>\n";
    return os.str();
  }

 private:
  std::string title_, x_label_, y_label_;
  std::vector<std::pair<std::string, std::vector<std::pair<double, double>>>> series_;
  double x_lo_ = 0, x_hi_ = 1;
  bool fixed_x_ = false;
};

}  // namespace

std::vector<ResultRow> parse_results_csv(const std::string& text) {
  std::vector<ResultRow> rows;
  std::istringstream is(text);
  std::string line;
  bool first = true;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    if (first && line.rfind("agent_name", 0) == 0) {
      first = false;
      continue;
    }
    first = false;
    auto cells = split_csv_line(line);
    if (cells.size() != 5)
      throw std::runtime_error("results csv: malformed row '" + line + "'");
    ResultRow r;
    r.agent = cells[0];
    r.env = cells[1];
    r.seed = static_cast<uint64_t>(std::stoull(cells[2]));
    r.env_step = std::stol(cells[3]);
    if (cells[4] == "nan") {
      r.failed = true;
      r.eval_return = std::numeric_limits<double>::quiet_NaN();
    } else {
      r.eval_return = std::stod(cells[4]);
    }
    rows.push_back(std::move(r));
  }
  return rows;
}

evalkit::ScoreTable final_score_table(const std::vector<ResultRow>& rows) {
  // (agent, env, seed) -> row at the largest step
  std::map<std::tuple<std::string, std::string, uint64_t>, ResultRow> last;
  std::vector<std::tuple<std::string, std::string, uint64_t>> order;
  for (const auto& r : rows) {
    if (r.failed) continue;
    auto key = std::make_tuple(r.agent, r.env, r.seed);
    auto it = last.find(key);
    if (it == last.end()) {
      last[key] = r;
      order.push_back(key);
    } else if (r.env_step >= it->second.env_step) {
      it->second = r;
    }
  }
  evalkit::ScoreTable table;
  for (const auto& key : order)
    table.add(std::get<0>(key), std::get<1>(key), last.at(key).eval_return);
  return table;
}

std::string summary_csv(const evalkit::ScoreTable& table) {
  std::string out = "agent_name,env,n_seeds,iqm,std,summary\n";
  for (const auto& a : table.agents())
    for (const auto& e : table.envs()) {
      const auto& scores = table.scores(a, e);
      const double iqm_v = evalkit::iqm(scores);
      const double sd = scores.size() >= 2 ? evalkit::sample_std(scores) : 0.0;
      out += a + "," + e + "," + std::to_string(scores.size()) + "," + fmt(iqm_v, "%.3f") + "," +
             fmt(sd, "%.3f") + "," + fmt(iqm_v, "%.1f") + " \xC2\xB1 " + fmt(sd, "%.1f") + "\n";
    }
  return out;
}

ReportFiles build_report(const std::vector<ResultRow>& rows,
                         const std::vector<std::pair<std::string, std::string>>& repr_csvs) {
  if (rows.empty()) throw std::runtime_error("report: no result rows");
  ReportFiles out;
  evalkit::ScoreTable table = final_score_table(rows);
  out.files["score_table.csv"] = summary_csv(table);

  if (table.agents().size() >= 2 && table.complete()) {
    auto rs = evalkit::relative_score(table);
    std::string csv = "agent_name,relative_score\n";
    for (const auto& a : table.agents()) csv += a + "," + fmt(rs.at(a), "%.3f") + "\n";
    out.files["relative_scores.csv"] = csv;
  }

  // per-env learning curves, one series per agent (mean over seeds per step)
  std::set<std::string> envs;
  for (const auto& r : rows)
    if (!r.failed) envs.insert(r.env);
  for (const auto& env_name : envs) {
    long max_step = 0;
    for (const auto& r : rows)
      if (!r.failed && r.env == env_name) max_step = std::max(max_step, r.env_step);
    SvgPlot plot("eval return, " + env_name, "env step", "return");
    plot.set_x_range(0, static_cast<double>(max_step));
    std::vector<std::string> agents;
    for (const auto& r : rows)
      if (!r.failed && r.env == env_name &&
          std::find(agents.begin(), agents.end(), r.agent) == agents.end())
        agents.push_back(r.agent);
    for (const auto& agent_name : agents) {
      std::map<long, std::pair<double, long>> acc;  // step -> (sum, count)
      for (const auto& r : rows)
        if (!r.failed && r.env == env_name && r.agent == agent_name) {
          acc[r.env_step].first += r.eval_return;
          acc[r.env_step].second += 1;
        }
      std::vector<std::pair<double, double>> pts;
      for (const auto& [step, sc] : acc)
        pts.emplace_back(static_cast<double>(step), sc.first / static_cast<double>(sc.second));
      plot.add_series(agent_name, std::move(pts));
    }
    out.files["curve_" + env_name + ".svg"] = plot.render();
  }

  // representation-metric curves when reports are present
  for (const auto& [name, csv] : repr_csvs) {
    std::istringstream is(csv);
    std::string line;
    std::getline(is, line);  // header
    std::vector<std::array<double, 5>> rows_m;
    while (std::getline(is, line)) {
      if (line.empty()) continue;
      auto cells = split_csv_line(line);
      if (cells.size() != 5) continue;
      rows_m.push_back({std::stod(cells[0]), std::stod(cells[1]), std::stod(cells[2]),
                        std::stod(cells[3]), std::stod(cells[4])});
    }
    const char* metric_names[] = {"dyn_awareness", "diversity", "orthogonality", "probe_mse"};
    SvgPlot plot("representation metrics, " + name, "update step", "metric");
    for (int m = 0; m < 4; ++m) {
      std::vector<std::pair<double, double>> pts;
      for (const auto& r : rows_m) pts.emplace_back(r[0], r[static_cast<size_t>(m) + 1]);
      plot.add_series(metric_names[m], std::move(pts));
    }
    out.files["metrics_" + name + ".svg"] = plot.render();
  }
  return out;
}

evalkit::ReprDataset build_repr_dataset(agent::SacAgent& agent, const train::ReplayBuffer& buffer,
                                        long max_rows) {
  const long n = std::min<long>(buffer.size(), max_rows);
  if (n < 1) throw std::invalid_argument("probe: empty dataset");
  evalkit::ReprDataset data;
  data.n = n;
  data.repr_dim = agent.online_encoder().out_dim();
  data.state_dim = buffer.state_dim();
  data.repr.reserve(static_cast<size_t>(n * data.repr_dim));
  data.next_repr.reserve(static_cast<size_t>(n * data.repr_dim));
  const int out_size = agent.config().encoder.input_size;
  const long chunk = 64;
  for (long start = 0; start < n; start += chunk) {
    const long count = std::min(chunk, n - start);
    ImageBatch s(static_cast<int>(count), 3 * buffer.spec().frame_stack,
                 buffer.spec().obs_render_size, buffer.spec().obs_render_size);
    ImageBatch s_next = s;
    for (long i = 0; i < count; ++i) {
      env::Transition t = buffer.transition(start + i);
      s.set_image(static_cast<int>(i), t.s);
      s_next.set_image(static_cast<int>(i), t.s_next);
      for (float v : t.state) data.states.push_back(v);
    }
    Tensor phi = agent.encode(to_float(aug::center_crop(s, out_size)), agent::WhichEncoder::online);
    Tensor phi_next =
        agent.encode(to_float(aug::center_crop(s_next, out_size)), agent::WhichEncoder::online);
    NoGradGuard ng;
    // value estimate at the policy action: Q1(phi, pi(phi))
    Var repr = Var::constant(phi);
    Tensor pi = agent.actor_mean(repr).value();
    Tensor q = agent.critic_q1(repr, pi, agent::WhichEncoder::online).value();
    for (long i = 0; i < count; ++i) {
      for (long k = 0; k < data.repr_dim; ++k) data.repr.push_back(phi.at2(i, k));
      for (long k = 0; k < data.repr_dim; ++k) data.next_repr.push_back(phi_next.at2(i, k));
      data.values.push_back(q[i]);
    }
  }
  data.validate();
  return data;
}

std::string probe_checkpoints(const train::TrainConfig& cfg,
                              const std::vector<std::string>& checkpoint_paths,
                              const std::string& dataset_path) {
  train::ReplayBuffer buffer = train::ReplayBuffer::load(dataset_path, cfg.env);
  std::string out = evalkit::representation_report_csv_header();
  long index = 0;
  for (const auto& path : checkpoint_paths) {
    agent::SacAgent agent(cfg.sac, 0);
    agent.load(path);
    evalkit::ReprDataset full = build_repr_dataset(agent, buffer);
    // the tail of the dataset is held out for probe evaluation
    const long split = full.n * 4 / 5;
    if (split < 1 || split >= full.n)
      throw std::invalid_argument("probe: dataset too small to split");
    auto take = [&](long lo, long hi) {
      evalkit::ReprDataset part;
      part.n = hi - lo;
      part.repr_dim = full.repr_dim;
      part.state_dim = full.state_dim;
      part.repr.assign(full.repr.begin() + lo * full.repr_dim,
                       full.repr.begin() + hi * full.repr_dim);
      part.next_repr.assign(full.next_repr.begin() + lo * full.repr_dim,
                            full.next_repr.begin() + hi * full.repr_dim);
      part.values.assign(full.values.begin() + lo, full.values.begin() + hi);
      part.states.assign(full.states.begin() + lo * full.state_dim,
                         full.states.begin() + hi * full.state_dim);
      return part;
    };
    evalkit::ReprDataset train_part = take(0, split);
    evalkit::ReprDataset test_part = take(split, full.n);

    // update step from a trailing integer in the checkpoint name, else order
    long step = index;
    {
      const size_t slash = path.find_last_of('/');
      std::string stem = slash == std::string::npos ? path : path.substr(slash + 1);
      const size_t dot = stem.find_last_of('.');
      if (dot != std::string::npos) stem.resize(dot);
      size_t digits = stem.size();
      while (digits > 0 && std::isdigit(static_cast<unsigned char>(stem[digits - 1]))) --digits;
      if (digits < stem.size()) step = std::stol(stem.substr(digits));
    }
    evalkit::RepresentationReport rep;
    rep.update_step = step;
    RandomStream rng(mix_seed(cfg.seed, 0xDA));
    rep.dyn_awareness = evalkit::dynamic_awareness(full, rng);
    rep.diversity = evalkit::diversity(take(0, std::min<long>(full.n, 512)));
    rep.orthogonality = evalkit::orthogonality(full);
    evalkit::ProbeConfig probe_cfg;
    probe_cfg.seed = cfg.seed;
    rep.probe_mse = evalkit::state_probe(train_part, test_part, probe_cfg);
    out += evalkit::representation_report_csv_row(rep);
    ++index;
  }
  return out;
}

}  // namespace jointrl::cli
