#include "harness/metrics.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <numeric>
#include <sstream>

#include <json.hpp>
#include <spdlog/spdlog.h>

namespace harness {

namespace fs = std::filesystem;

namespace {

double mean_of(const std::vector<double>& v) {
  return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

template <typename T>
void push_unique(std::vector<T>& v, const T& x) {
  if (std::find(v.begin(), v.end(), x) == v.end()) v.push_back(x);
}

// Accumulates per-task terms and produces the overall mean of all terms.
class TermCollector {
 public:
  void add(const std::string& task, double term) {
    terms_.push_back(term);
    by_task_[task].push_back(term);
  }
  void note(std::string n) { push_unique(notes_, n); }

  MetricValue finish(const std::string& absent_reason) {
    MetricValue m;
    if (!terms_.empty()) m.value = mean_of(terms_);
    for (const auto& [task, terms] : by_task_) m.per_task[task] = mean_of(terms);
    m.notes = std::move(notes_);
    if (!m.value) m.notes.push_back(absent_reason);
    return m;
  }

 private:
  std::vector<double> terms_;
  std::map<std::string, std::vector<double>> by_task_;
  std::vector<std::string> notes_;
};

// Navigation over the block sequence of a performance table.
class BlockIndex {
 public:
  explicit BlockIndex(const PerformanceTable& table) : table_(table) {
    for (const auto& lb : table.learn_blocks) {
      for (const auto& task : lb.tasks) learn_blocks_of_[task].push_back(lb.block_num);
    }
  }

  const PerformanceTable::EvalBlock* next_eval_after(std::int64_t block_num) const {
    for (const auto& e : table_.eval_blocks) {
      if (e.block_num > block_num) return &e;
    }
    return nullptr;
  }

  const PerformanceTable::EvalBlock* last_eval_before(std::int64_t block_num) const {
    const PerformanceTable::EvalBlock* found = nullptr;
    for (const auto& e : table_.eval_blocks) {
      if (e.block_num < block_num) found = &e;
    }
    return found;
  }

  const std::vector<std::int64_t>& learn_blocks_of(const std::string& task) const {
    static const std::vector<std::int64_t> kNone;
    const auto it = learn_blocks_of_.find(task);
    return it == learn_blocks_of_.end() ? kNone : it->second;
  }

  std::optional<std::int64_t> first_learn_block(const std::string& task) const {
    const auto& lbs = learn_blocks_of(task);
    if (lbs.empty()) return std::nullopt;
    return lbs.front();
  }

  std::optional<std::int64_t> last_learn_block_before(const std::string& task,
                                                      std::int64_t block_num) const {
    std::optional<std::int64_t> found;
    for (std::int64_t b : learn_blocks_of(task)) {
      if (b < block_num) found = b;
    }
    return found;
  }

 private:
  const PerformanceTable& table_;
  std::map<std::string, std::vector<std::int64_t>> learn_blocks_of_;
};

std::optional<double> lookup(const PerformanceTable::EvalBlock& e, const std::string& task) {
  const auto it = e.performance.find(task);
  if (it == e.performance.end()) return std::nullopt;
  return it->second;
}

std::string missing_note(const std::string& task, std::int64_t block_num) {
  return "task " + task + " missing from eval block " + std::to_string(block_num);
}

std::string format_number(double v) {
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

}  // namespace

std::optional<double> PerformanceTable::performance(const std::string& task,
                                                    std::int64_t eval_block_num) const {
  for (const auto& e : eval_blocks) {
    if (e.block_num == eval_block_num) return lookup(e, task);
  }
  return std::nullopt;
}

PerformanceTable build_performance_table(const std::vector<EpisodeRecord>& episodes) {
  PerformanceTable table;
  // block -> task -> variant -> rewards, keeping first-appearance order.
  struct VariantRewards {
    std::string variant;
    std::vector<double> rewards;
  };
  struct TaskRewards {
    std::string task;
    std::vector<VariantRewards> variants;
  };
  struct BlockRewards {
    std::int64_t block_num;
    BlockType type;
    std::vector<TaskRewards> tasks;
  };
  std::vector<BlockRewards> blocks;

  for (const auto& rec : episodes) {
    push_unique(table.tasks, rec.task_name);
    if (blocks.empty() || blocks.back().block_num != rec.block_num) {
      blocks.push_back({rec.block_num, rec.block_type, {}});
    }
    auto& tasks = blocks.back().tasks;
    auto tit = std::find_if(tasks.begin(), tasks.end(),
                            [&](const TaskRewards& t) { return t.task == rec.task_name; });
    if (tit == tasks.end()) tit = tasks.insert(tasks.end(), TaskRewards{rec.task_name, {}});
    auto vit = std::find_if(tit->variants.begin(), tit->variants.end(),
                            [&](const VariantRewards& v) { return v.variant == rec.variant_name; });
    if (vit == tit->variants.end()) {
      vit = tit->variants.insert(tit->variants.end(), VariantRewards{rec.variant_name, {}});
    }
    vit->rewards.push_back(rec.reward);
    if (rec.block_type == BlockType::Learn) table.training_curves[rec.task_name].push_back(rec.reward);
  }

  for (const auto& block : blocks) {
    if (block.type == BlockType::Learn) {
      PerformanceTable::LearnBlock lb{block.block_num, {}};
      for (const auto& t : block.tasks) lb.tasks.push_back(t.task);
      table.learn_blocks.push_back(std::move(lb));
      continue;
    }
    PerformanceTable::EvalBlock eb{block.block_num, {}};
    for (const auto& t : block.tasks) {
      std::vector<double> variant_means;
      for (const auto& v : t.variants) variant_means.push_back(mean_of(v.rewards));
      eb.performance[t.task] = mean_of(variant_means);
    }
    table.eval_blocks.push_back(std::move(eb));
  }
  return table;
}

MetricValue compute_pm(const PerformanceTable& table) {
  const BlockIndex index(table);
  TermCollector terms;
  for (const auto& task : table.tasks) {
    for (const auto& e : table.eval_blocks) {
      const auto last_lb = index.last_learn_block_before(task, e.block_num);
      if (!last_lb) continue;
      const auto* ref = index.next_eval_after(*last_lb);
      if (ref == nullptr || ref->block_num >= e.block_num) continue;
      const auto now = lookup(e, task);
      const auto then = lookup(*ref, task);
      if (!now) {
        terms.note(missing_note(task, e.block_num));
        continue;
      }
      if (!then) {
        terms.note(missing_note(task, ref->block_num));
        continue;
      }
      terms.add(task, *now - *then);
    }
  }
  return terms.finish("no evaluation after a post-training reference block");
}

MetricValue compute_mtp(const PerformanceTable& table) {
  std::vector<double> task_means;
  MetricValue m;
  for (const auto& task : table.tasks) {
    const auto it = table.training_curves.find(task);
    if (it == table.training_curves.end() || it->second.empty()) continue;
    const double mean = mean_of(it->second);
    m.per_task[task] = mean;
    task_means.push_back(mean);
  }
  if (task_means.empty()) {
    m.notes.push_back("no training episodes");
  } else {
    m.value = mean_of(task_means);
  }
  return m;
}

MetricValue compute_mep(const PerformanceTable& table) {
  MetricValue m;
  std::vector<double> task_means;
  for (const auto& task : table.tasks) {
    std::vector<double> values;
    for (const auto& e : table.eval_blocks) {
      if (auto p = lookup(e, task)) values.push_back(*p);
    }
    if (values.empty()) continue;
    const double mean = mean_of(values);
    m.per_task[task] = mean;
    task_means.push_back(mean);
  }
  if (task_means.empty()) {
    m.notes.push_back("no evaluation blocks");
  } else {
    m.value = mean_of(task_means);
  }
  return m;
}

MetricValue compute_ft(const PerformanceTable& table) {
  const BlockIndex index(table);
  TermCollector terms;
  for (const auto& a : table.tasks) {
    const auto first_a = index.first_learn_block(a);
    if (!first_a) continue;
    for (const auto& b : table.tasks) {
      if (a == b) continue;
      const auto first_b = index.first_learn_block(b);
      if (!first_b || *first_a >= *first_b) continue;
      const auto* after = index.next_eval_after(*first_a);
      const auto* before = index.last_eval_before(*first_a);
      if (after == nullptr || before == nullptr || after->block_num >= *first_b) continue;
      const auto p_after = lookup(*after, b);
      const auto p_before = lookup(*before, b);
      if (!p_after || !p_before) {
        terms.note(missing_note(b, p_after ? before->block_num : after->block_num));
        continue;
      }
      terms.add(b, *p_after - *p_before);
    }
  }
  return terms.finish("no task pair with evaluations around the earlier task's first training");
}

MetricValue compute_bt(const PerformanceTable& table) {
  const BlockIndex index(table);
  TermCollector terms;
  for (const auto& a : table.tasks) {
    const auto first_a = index.first_learn_block(a);
    if (!first_a) continue;
    for (const auto& b : table.tasks) {
      if (a == b) continue;
      for (std::int64_t lb : index.learn_blocks_of(b)) {
        if (lb <= *first_a) continue;
        const auto last_a = index.last_learn_block_before(a, lb);
        if (!last_a) continue;
        const auto* ref = index.next_eval_after(*last_a);
        const auto* after = index.next_eval_after(lb);
        if (ref == nullptr || after == nullptr || ref->block_num >= lb) continue;
        const auto p_after = lookup(*after, a);
        const auto p_ref = lookup(*ref, a);
        if (!p_after || !p_ref) {
          terms.note(missing_note(a, p_after ? ref->block_num : after->block_num));
          continue;
        }
        terms.add(a, *p_after - *p_ref);
      }
    }
  }
  return terms.finish("no task trained after another with evaluations on both sides");
}

std::vector<double> smooth_curve(const std::vector<double>& values, std::size_t window) {
  if (values.empty()) return {};
  const std::size_t w = std::clamp<std::size_t>(window, 1, values.size());
  std::vector<double> out;
  out.reserve(values.size() - w + 1);
  for (std::size_t j = 0; j + w <= values.size(); ++j) {
    double sum = 0.0;
    for (std::size_t i = j; i < j + w; ++i) sum += values[i];
    out.push_back(sum / static_cast<double>(w));
  }
  return out;
}

Saturation saturation(const std::vector<double>& values) {
  Saturation s;
  if (values.empty()) return s;
  s.value = *std::max_element(values.begin(), values.end());
  for (std::size_t i = 0; i < values.size(); ++i) {
    const bool reached = s.value > 0 ? values[i] >= 0.95 * s.value : values[i] == s.value;
    if (reached) {
      s.experience = static_cast<std::int64_t>(i) + 1;
      break;
    }
  }
  return s;
}

double trapezoid_auc(const std::vector<double>& values) {
  double area = 0.0;
  for (std::size_t i = 1; i < values.size(); ++i) area += 0.5 * (values[i - 1] + values[i]);
  return area;
}

namespace {

std::vector<double> prefix(const std::vector<double>& v, std::size_t n) {
  return {v.begin(), v.begin() + static_cast<std::ptrdiff_t>(n)};
}

// Calls fn(task, lifetime_curve, ste_curve) on aligned prefixes for every task
// with an expert curve.
template <typename Fn>
MetricValue over_ste_tasks(const PerformanceTable& table, const STEStore& ste,
                           const std::string& absent_reason, Fn&& fn) {
  TermCollector terms;
  for (const auto& task : table.tasks) {
    const auto ll = table.training_curves.find(task);
    if (ll == table.training_curves.end() || ll->second.empty()) continue;
    const auto expert = ste.curves.find(task);
    if (expert == ste.curves.end() || expert->second.empty()) {
      terms.note("no single-task expert log for task " + task);
      continue;
    }
    const std::size_t n = std::min(ll->second.size(), expert->second.size());
    if (auto term = fn(task, prefix(ll->second, n), prefix(expert->second, n), terms)) {
      terms.add(task, *term);
    }
  }
  return terms.finish(absent_reason);
}

}  // namespace

MetricValue compute_rp(const PerformanceTable& table, const STEStore& ste) {
  return over_ste_tasks(
      table, ste, "no task with a usable single-task expert curve",
      [](const std::string& task, const std::vector<double>& ll, const std::vector<double>& st,
         TermCollector& terms) -> std::optional<double> {
        if (ll.size() < 2) {
          terms.note("task " + task + ": fewer than two aligned episodes");
          return std::nullopt;
        }
        const double expert_area = trapezoid_auc(st);
        if (expert_area == 0.0) {
          terms.note("task " + task + ": single-task expert area is zero");
          return std::nullopt;
        }
        return trapezoid_auc(ll) / expert_area;
      });
}

MetricValue compute_se(const PerformanceTable& table, const STEStore& ste) {
  return over_ste_tasks(
      table, ste, "no task with a usable single-task expert curve",
      [](const std::string& task, const std::vector<double>& ll, const std::vector<double>& st,
         TermCollector& terms) -> std::optional<double> {
        const Saturation sat_ll = saturation(smooth_curve(ll));
        const Saturation sat_st = saturation(smooth_curve(st));
        if (sat_st.value == 0.0) {
          terms.note("task " + task + ": single-task expert saturation is zero");
          return std::nullopt;
        }
        if (sat_ll.experience == 0) {
          terms.note("task " + task + ": zero experience to saturation");
          return std::nullopt;
        }
        return (sat_ll.value / sat_st.value) * (static_cast<double>(sat_st.experience) /
                                                static_cast<double>(sat_ll.experience));
      });
}

namespace {

std::map<std::string, std::vector<double>> learning_curves(const std::vector<EpisodeRecord>& eps) {
  std::map<std::string, std::vector<double>> curves;
  for (const auto& rec : eps) {
    if (rec.block_type == BlockType::Learn) curves[rec.task_name].push_back(rec.reward);
  }
  return curves;
}

}  // namespace

STEStore STEStore::from_episodes(const std::vector<EpisodeRecord>& episodes) {
  STEStore store;
  store.curves = learning_curves(episodes);
  return store;
}

STEStore STEStore::load(const fs::path& dir) {
  if (!fs::is_directory(dir)) throw LogReadError(dir.string() + ": not a directory");
  STEStore store;
  std::vector<fs::path> task_dirs;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (entry.is_directory()) task_dirs.push_back(entry.path());
  }
  std::sort(task_dirs.begin(), task_dirs.end());

  for (const auto& task_dir : task_dirs) {
    const std::string task = task_dir.filename().string();
    std::vector<fs::path> lifetimes = lifetime_dirs(task_dir);
    if (lifetimes.empty()) {
      std::vector<fs::path> runs;
      for (const auto& entry : fs::directory_iterator(task_dir)) {
        if (entry.is_directory()) runs.push_back(entry.path());
      }
      std::sort(runs.begin(), runs.end());
      for (const auto& run : runs) {
        for (auto& l : lifetime_dirs(run)) lifetimes.push_back(std::move(l));
      }
    }
    std::vector<std::vector<double>> logs;
    for (const auto& l : lifetimes) {
      const LifetimeLog log = read_lifetime(l);
      auto curves = learning_curves(log.episodes);
      if (curves.size() != 1 || curves.begin()->first != task) {
        throw LogReadError(l.string() + ": single-task expert log must contain only learning "
                                        "episodes of task " + task);
      }
      logs.push_back(std::move(curves.begin()->second));
    }
    if (logs.empty()) continue;
    std::size_t n = logs.front().size();
    for (const auto& c : logs) n = std::min(n, c.size());
    std::vector<double> avg(n, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
      for (const auto& c : logs) avg[i] += c[i];
      avg[i] /= static_cast<double>(logs.size());
    }
    store.curves[task] = std::move(avg);
  }
  return store;
}

LifetimeReport compute_lifetime_report(const std::string& label, const PerformanceTable& table,
                                       const STEStore* ste) {
  LifetimeReport r;
  r.lifetime = label;
  r.pm = compute_pm(table);
  r.mtp = compute_mtp(table);
  r.mep = compute_mep(table);
  r.ft = compute_ft(table);
  r.bt = compute_bt(table);
  if (ste != nullptr) {
    r.rp = compute_rp(table, *ste);
    r.se = compute_se(table, *ste);
  } else {
    r.rp.notes.push_back("no single-task expert store supplied");
    r.se.notes.push_back("no single-task expert store supplied");
  }
  return r;
}

const MetricValue& metric_by_name(const LifetimeReport& report, const std::string& name) {
  if (name == "pm") return report.pm;
  if (name == "mtp") return report.mtp;
  if (name == "mep") return report.mep;
  if (name == "ft") return report.ft;
  if (name == "bt") return report.bt;
  if (name == "rp") return report.rp;
  if (name == "se") return report.se;
  throw std::invalid_argument("unknown metric: " + name);
}

MetricsReport aggregate_report(std::vector<LifetimeReport> lifetimes) {
  MetricsReport report;
  report.lifetimes = std::move(lifetimes);
  for (const char* name : kMetricNames) {
    std::vector<double> values;
    for (const auto& l : report.lifetimes) {
      if (const auto& v = metric_by_name(l, name).value) values.push_back(*v);
    }
    AggregateMetric agg;
    agg.count = static_cast<std::int64_t>(values.size());
    if (!values.empty()) {
      const double mean = mean_of(values);
      agg.mean = mean;
      if (values.size() >= 2) {
        double ss = 0.0;
        for (double v : values) ss += (v - mean) * (v - mean);
        agg.std_dev = std::sqrt(ss / static_cast<double>(values.size() - 1));
      }
    }
    report.aggregate[name] = agg;
  }
  return report;
}

MetricsReport compute_metrics(const fs::path& log_dir, const STEStore* ste) {
  const auto dirs = lifetime_dirs(log_dir);
  if (dirs.empty()) throw LogReadError(log_dir.string() + ": no lifetime logs found");
  std::vector<LifetimeReport> reports;
  std::vector<std::string> notes;
  for (const auto& dir : dirs) {
    const LifetimeLog log = read_lifetime(dir);
    if (log.metadata.status != "ok") {
      notes.push_back(dir.filename().string() + ": skipped, lifetime status " +
                      log.metadata.status);
      spdlog::warn("skipping failed lifetime {}", dir.string());
      continue;
    }
    reports.push_back(compute_lifetime_report(dir.filename().string(),
                                              build_performance_table(log.episodes), ste));
  }
  MetricsReport report = aggregate_report(std::move(reports));
  report.notes = std::move(notes);
  return report;
}

std::string report_to_json(const MetricsReport& report) {
  using nlohmann::ordered_json;
  auto opt = [](const std::optional<double>& v) { return v ? ordered_json(*v) : ordered_json(); };
  ordered_json lifetimes = ordered_json::array();
  for (const auto& l : report.lifetimes) {
    ordered_json metrics = ordered_json::object();
    for (const char* name : kMetricNames) {
      const MetricValue& m = metric_by_name(l, name);
      ordered_json per_task = ordered_json::object();
      for (const auto& [task, v] : m.per_task) per_task[task] = v;
      metrics[name] = {{"value", opt(m.value)}, {"per_task", per_task}, {"notes", m.notes}};
    }
    lifetimes.push_back({{"lifetime", l.lifetime}, {"metrics", metrics}});
  }
  ordered_json aggregate = ordered_json::object();
  for (const char* name : kMetricNames) {
    const auto it = report.aggregate.find(name);
    const AggregateMetric agg = it == report.aggregate.end() ? AggregateMetric{} : it->second;
    aggregate[name] = {{"mean", opt(agg.mean)}, {"std", opt(agg.std_dev)}, {"count", agg.count}};
  }
  ordered_json doc;
  doc["lifetimes"] = std::move(lifetimes);
  doc["aggregate"] = std::move(aggregate);
  doc["notes"] = report.notes;
  return doc.dump(2) + "\n";
}

std::string report_to_csv(const MetricsReport& report) {
  std::ostringstream out;
  out << "lifetime";
  for (const char* name : kMetricNames) out << ',' << name;
  out << '\n';
  for (const auto& l : report.lifetimes) {
    out << l.lifetime;
    for (const char* name : kMetricNames) {
      out << ',';
      if (const auto& v = metric_by_name(l, name).value) out << format_number(*v);
    }
    out << '\n';
  }
  out << "aggregate";
  for (const char* name : kMetricNames) {
    out << ',';
    const auto it = report.aggregate.find(name);
    if (it != report.aggregate.end() && it->second.mean) out << format_number(*it->second.mean);
  }
  out << '\n';
  return out.str();
}

std::string curve_data_csv(const fs::path& log_dir) {
  std::ostringstream out;
  out << "lifetime,block_num,task,performance\n";
  for (const auto& dir : lifetime_dirs(log_dir)) {
    const LifetimeLog log = read_lifetime(dir);
    const PerformanceTable table = build_performance_table(log.episodes);
    for (const auto& e : table.eval_blocks) {
      for (const auto& task : table.tasks) {
        if (auto p = lookup(e, task)) {
          out << dir.filename().string() << ',' << e.block_num << ',' << task << ','
              << format_number(*p) << '\n';
        }
      }
    }
  }
  return out.str();
}

}  // namespace harness
