#include "soorl/harness.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <exception>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>
#include <thread>

namespace soorl {

ConfigError::ConfigError(std::string key_path, int line, const std::string& message)
    : std::runtime_error((key_path.empty() ? std::string("config") : key_path) +
                         (line > 0 ? " (line " + std::to_string(line) + ")" : std::string()) + ": " + message),
      key_path_(std::move(key_path)),
      line_(line) {}

namespace {

using nlohmann::json;

int line_at(const std::string& text, std::size_t pos) {
  return 1 + static_cast<int>(std::count(text.begin(), text.begin() + static_cast<std::ptrdiff_t>(pos), '\n'));
}

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

std::string num(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

struct Path {
  std::vector<std::string> parts;

  Path operator/(const std::string& key) const {
    Path p = *this;
    p.parts.push_back(key);
    return p;
  }
  Path operator[](std::size_t i) const {
    Path p = *this;
    p.parts.push_back("[" + std::to_string(i) + "]");
    return p;
  }
  std::string str() const {
    std::string out;
    for (const auto& s : parts) {
      if (!out.empty() && s.front() != '[') out += '.';
      out += s;
    }
    return out;
  }
};

class Reader {
 public:
  explicit Reader(const std::string& text) : text_(text) {}

  [[noreturn]] void fail(const Path& path, const std::string& message) const {
    throw ConfigError(path.str(), locate(path), message);
  }

  void keys(const json& obj, const Path& path, std::initializer_list<const char*> allowed) const {
    if (!obj.is_object()) fail(path, "expected an object");
    for (const auto& [key, value] : obj.items()) {
      if (std::none_of(allowed.begin(), allowed.end(), [&](const char* a) { return key == a; })) {
        fail(path / key, "unknown key '" + key + "'");
      }
    }
  }

  long integer(const json& v, const Path& path) const {
    if (!v.is_number_integer()) fail(path, "expected an integer");
    return v.get<long>();
  }
  double number(const json& v, const Path& path) const {
    if (!v.is_number()) fail(path, "expected a number");
    return v.get<double>();
  }
  bool boolean(const json& v, const Path& path) const {
    if (!v.is_boolean()) fail(path, "expected true or false");
    return v.get<bool>();
  }
  std::string string(const json& v, const Path& path) const {
    if (!v.is_string()) fail(path, "expected a string");
    return v.get<std::string>();
  }
  const json& array(const json& v, const Path& path) const {
    if (!v.is_array()) fail(path, "expected an array");
    return v;
  }

 private:
  // Finds each key of the path in order; array indices skip earlier siblings.
  int locate(const Path& path) const {
    std::size_t pos = 0;
    std::size_t skip = 0;
    bool found = false;
    for (const auto& part : path.parts) {
      if (part.front() == '[') {
        skip = std::stoul(part.substr(1));
        continue;
      }
      const std::string quoted = "\"" + part + "\"";
      std::size_t at = text_.find(quoted, pos);
      for (std::size_t k = 0; k < skip && at != std::string::npos; ++k) at = text_.find(quoted, at + 1);
      skip = 0;
      if (at == std::string::npos) break;
      pos = at + 1;
      found = true;
    }
    return found ? line_at(text_, pos - 1) : 0;
  }

  const std::string& text_;
};

ClassId class_by_name(const Environment& env, const std::string& name, const Reader& rd, const Path& path) {
  for (const auto& c : env.object_classes()) {
    if (c.name == name) return c.id;
  }
  rd.fail(path, "unknown object class '" + name + "'");
}

std::string class_name(const Environment& env, ClassId id) {
  for (const auto& c : env.object_classes()) {
    if (c.id == id) return c.name;
  }
  return std::to_string(id);
}

int action_by_name(const Environment& env, const std::string& name, const Reader& rd, const Path& path) {
  const auto names = env.action_names();
  const auto ids = env.atomic_actions();
  for (std::size_t i = 0; i < names.size(); ++i) {
    if (names[i] == name) return ids[i];
  }
  rd.fail(path, "unknown action '" + name + "'");
}

std::string action_name(const Environment& env, int id) {
  const auto names = env.action_names();
  const auto ids = env.atomic_actions();
  for (std::size_t i = 0; i < ids.size(); ++i) {
    if (ids[i] == id) return names[i];
  }
  return std::to_string(id);
}

void read_planner(const json& j, const Path& path, const Reader& rd, PlannerConfig& p, bool& has_r_max) {
  rd.keys(j, path, {"depth", "rollouts", "models", "ucb_c", "gamma", "r_max", "leaf_value"});
  if (j.contains("depth")) p.depth = static_cast<int>(rd.integer(j["depth"], path / "depth"));
  if (j.contains("rollouts")) p.rollouts = static_cast<int>(rd.integer(j["rollouts"], path / "rollouts"));
  if (j.contains("models")) p.models = static_cast<int>(rd.integer(j["models"], path / "models"));
  if (j.contains("ucb_c")) p.ucb_c = rd.number(j["ucb_c"], path / "ucb_c");
  if (j.contains("gamma")) p.gamma = rd.number(j["gamma"], path / "gamma");
  if (j.contains("r_max")) {
    p.r_max = rd.number(j["r_max"], path / "r_max");
    has_r_max = true;
  }
  if (j.contains("leaf_value")) p.leaf_value = rd.boolean(j["leaf_value"], path / "leaf_value");
  try {
    validate(p);
  } catch (const std::invalid_argument& e) {
    rd.fail(path, e.what());
  }
}

int feature_set_of(const json& j, const Path& path, const Reader& rd) {
  FeatureSet fs;
  for (std::size_t i = 0; i < rd.array(j, path).size(); ++i) {
    const std::string name = rd.string(j[i], path[i]);
    if (name == "size") {
      fs.size = true;
    } else if (name == "location") {
      fs.location = true;
    } else if (name == "intersection") {
      fs.intersection = true;
    } else {
      rd.fail(path[i], "unknown feature '" + name + "'");
    }
  }
  return feature_set_index(fs);
}

void read_agent(const json& j, const Path& path, const Reader& rd, const Environment& env, AgentConfig& a) {
  rd.keys(j, path, {"beta", "alpha", "grid", "transitions", "epsilon_ent", "initial_t", "max_t",
                    "null_uses_action", "reward_features", "pinned"});
  if (j.contains("beta")) a.beta = rd.number(j["beta"], path / "beta");
  if (a.beta < 0.0) rd.fail(path / "beta", "must be non-negative");
  if (j.contains("alpha")) a.alpha = rd.number(j["alpha"], path / "alpha");
  if (!(a.alpha > 0.0)) rd.fail(path / "alpha", "must be positive");
  if (j.contains("grid")) {
    const Path gp = path / "grid";
    rd.keys(j["grid"], gp, {"n", "m"});
    if (j["grid"].contains("n")) a.grid.n = static_cast<int>(rd.integer(j["grid"]["n"], gp / "n"));
    if (j["grid"].contains("m")) a.grid.m = static_cast<int>(rd.integer(j["grid"]["m"], gp / "m"));
    if (a.grid.n < 1 || a.grid.m < 1) rd.fail(gp, "grid dimensions must be positive");
  }
  if (j.contains("transitions")) {
    const std::string t = rd.string(j["transitions"], path / "transitions");
    if (t == "learned") {
      a.transitions = TransitionSource::Learned;
    } else if (t == "oracle") {
      a.transitions = TransitionSource::Oracle;
    } else {
      rd.fail(path / "transitions", "expected 'learned' or 'oracle'");
    }
  }
  if (j.contains("epsilon_ent")) a.family.epsilon_ent = rd.number(j["epsilon_ent"], path / "epsilon_ent");
  if (j.contains("initial_t")) a.family.initial_t = static_cast<int>(rd.integer(j["initial_t"], path / "initial_t"));
  if (j.contains("max_t")) a.family.max_t = static_cast<int>(rd.integer(j["max_t"], path / "max_t"));
  if (a.family.initial_t < 1 || a.family.max_t < a.family.initial_t) {
    rd.fail(path / "max_t", "need 1 <= initial_t <= max_t");
  }
  if (j.contains("null_uses_action")) {
    a.family.null_uses_action = rd.boolean(j["null_uses_action"], path / "null_uses_action");
  }
  if (j.contains("reward_features") && !j["reward_features"].is_null()) {
    a.reward_feature_set = feature_set_of(j["reward_features"], path / "reward_features", rd);
  }
  if (j.contains("pinned")) {
    const Path pp = path / "pinned";
    const json& list = rd.array(j["pinned"], pp);
    for (std::size_t i = 0; i < list.size(); ++i) {
      const Path ip = pp[i];
      const json& pin = list[i];
      rd.keys(pin, ip, {"kind", "self", "partner", "features"});
      for (const char* req : {"kind", "self", "features"}) {
        if (!pin.contains(req)) rd.fail(ip / req, "missing key");
      }
      FamilyKey key;
      const std::string kind = rd.string(pin["kind"], ip / "kind");
      if (kind == "transition") {
        key.kind = FamilyKind::Transition;
      } else if (kind == "reward") {
        key.kind = FamilyKind::Reward;
      } else {
        rd.fail(ip / "kind", "expected 'transition' or 'reward'");
      }
      key.self = class_by_name(env, rd.string(pin["self"], ip / "self"), rd, ip / "self");
      if (pin.contains("partner")) {
        key.partner = class_by_name(env, rd.string(pin["partner"], ip / "partner"), rd, ip / "partner");
      }
      a.pinned[key] = feature_set_of(pin["features"], ip / "features", rd);
    }
  }
}

void read_macros(const json& j, const Path& path, const Reader& rd, const Environment& env, MacroSpec& m) {
  if (j.is_string()) {
    if (rd.string(j, path) != "atomic") rd.fail(path, "expected 'atomic', a list or a 'learn' object");
    m.kind = MacroSpec::Kind::Atomic;
    return;
  }
  if (j.is_array()) {
    m.kind = MacroSpec::Kind::Fixed;
    for (std::size_t i = 0; i < j.size(); ++i) {
      const Path ip = path[i];
      if (!j[i].is_array() || j[i].size() != 2) rd.fail(ip, "expected [action, noops]");
      const int a = action_by_name(env, rd.string(j[i][0], ip[0]), rd, ip[0]);
      const long n = rd.integer(j[i][1], ip[1]);
      if (n < 0) rd.fail(ip[1], "noops must be non-negative");
      m.fixed.push_back({a, static_cast<int>(n)});
    }
    if (m.fixed.empty()) rd.fail(path, "macro list is empty");
    return;
  }
  rd.keys(j, path, {"learn"});
  if (!j.contains("learn")) rd.fail(path / "learn", "missing key");
  const Path lp = path / "learn";
  const json& l = j["learn"];
  rd.keys(l, lp, {"k_max", "threshold", "budget", "seed"});
  m.kind = MacroSpec::Kind::Learned;
  if (l.contains("k_max")) m.learner.k_max = static_cast<int>(rd.integer(l["k_max"], lp / "k_max"));
  if (l.contains("threshold")) m.learner.threshold = rd.number(l["threshold"], lp / "threshold");
  if (l.contains("budget")) m.learner.budget_per_eval = static_cast<int>(rd.integer(l["budget"], lp / "budget"));
  if (l.contains("seed")) m.learner.seed = static_cast<std::uint64_t>(rd.integer(l["seed"], lp / "seed"));
  if (m.learner.k_max < 0 || m.learner.budget_per_eval < 1) rd.fail(lp, "k_max must be >= 0 and budget >= 1");
}

}  // namespace

ExperimentConfig parse_config_text(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError("", line_at(text, std::min<std::size_t>(e.byte > 0 ? e.byte - 1 : 0, text.size())), e.what());
  }
  const Reader rd(text);
  const Path root;
  rd.keys(j, root, {"env", "modes", "seeds", "episodes", "stop_when_consistent", "workers", "output_dir", "planner",
                    "agent", "macros", "rollouts"});
  ExperimentConfig cfg;
  if (!j.contains("env")) rd.fail(root / "env", "missing key");
  cfg.env = rd.string(j["env"], root / "env");
  std::unique_ptr<Environment> env;
  try {
    env = make_environment(cfg.env);
  } catch (const EnvError& e) {
    rd.fail(root / "env", e.what());
  }

  if (!j.contains("seeds")) rd.fail(root / "seeds", "missing key");
  const json& seeds = rd.array(j["seeds"], root / "seeds");
  if (seeds.empty()) rd.fail(root / "seeds", "at least one seed is required");
  for (std::size_t i = 0; i < seeds.size(); ++i) {
    const long s = rd.integer(seeds[i], (root / "seeds")[i]);
    if (s < 0) rd.fail((root / "seeds")[i], "seeds must be non-negative");
    cfg.seeds.push_back(static_cast<std::uint64_t>(s));
  }

  if (j.contains("modes")) {
    cfg.modes.clear();
    const json& modes = rd.array(j["modes"], root / "modes");
    if (modes.empty()) rd.fail(root / "modes", "at least one mode is required");
    for (std::size_t i = 0; i < modes.size(); ++i) {
      const std::string name = rd.string(modes[i], (root / "modes")[i]);
      try {
        cfg.modes.push_back(parse_mode(name));
      } catch (const std::invalid_argument& e) {
        rd.fail((root / "modes")[i], e.what());
      }
    }
  }
  if (j.contains("episodes")) cfg.episodes = static_cast<int>(rd.integer(j["episodes"], root / "episodes"));
  if (cfg.episodes < 1) rd.fail(root / "episodes", "must be positive");
  if (j.contains("stop_when_consistent")) {
    cfg.stop_when_consistent = rd.boolean(j["stop_when_consistent"], root / "stop_when_consistent");
  }
  if (j.contains("workers")) cfg.workers = static_cast<int>(rd.integer(j["workers"], root / "workers"));
  if (cfg.workers < 1) rd.fail(root / "workers", "must be positive");
  if (j.contains("output_dir")) cfg.output_dir = rd.string(j["output_dir"], root / "output_dir");

  bool has_r_max = false;
  if (j.contains("planner")) read_planner(j["planner"], root / "planner", rd, cfg.agent.planner, has_r_max);
  if (!has_r_max) {
    int largest = 1;
    for (int r : env->declared_rewards()) largest = std::max(largest, std::abs(r));
    cfg.agent.planner.r_max = 10.0 * largest;
  }
  if (j.contains("agent")) read_agent(j["agent"], root / "agent", rd, *env, cfg.agent);
  if (j.contains("macros")) read_macros(j["macros"], root / "macros", rd, *env, cfg.macros);
  if (j.contains("rollouts")) {
    const Path rp = root / "rollouts";
    const json& list = rd.array(j["rollouts"], rp);
    for (std::size_t i = 0; i < list.size(); ++i) {
      const long r = rd.integer(list[i], rp[i]);
      if (r < 1) rd.fail(rp[i], "rollout budgets must be positive");
      if (!cfg.rollouts.empty() && r <= cfg.rollouts.back()) rd.fail(rp[i], "rollout budgets must strictly increase");
      cfg.rollouts.push_back(static_cast<int>(r));
    }
  }
  return cfg;
}

ExperimentConfig parse_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read config '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config_text(ss.str());
}

nlohmann::json ExperimentConfig::to_json() const {
  const auto e = make_environment(env);
  json j;
  j["env"] = env;
  j["modes"] = json::array();
  for (auto m : modes) j["modes"].push_back(to_string(m));
  j["seeds"] = seeds;
  j["episodes"] = episodes;
  j["stop_when_consistent"] = stop_when_consistent;
  j["workers"] = workers;
  j["output_dir"] = output_dir;
  const PlannerConfig& p = agent.planner;
  j["planner"] = {{"depth", p.depth}, {"rollouts", p.rollouts}, {"models", p.models}, {"ucb_c", p.ucb_c},
                  {"gamma", p.gamma}, {"r_max", p.r_max},       {"leaf_value", p.leaf_value}};
  json pins = json::array();
  for (const auto& [key, fs] : agent.pinned) {
    json pin{{"kind", key.kind == FamilyKind::Transition ? "transition" : "reward"},
             {"self", class_name(*e, key.self)},
             {"features", kFeatureSets[static_cast<std::size_t>(fs)].names()}};
    if (key.pairwise()) pin["partner"] = class_name(*e, key.partner);
    pins.push_back(pin);
  }
  j["agent"] = {{"beta", agent.beta},
                {"alpha", agent.alpha},
                {"grid", {{"n", agent.grid.n}, {"m", agent.grid.m}}},
                {"transitions", agent.transitions == TransitionSource::Oracle ? "oracle" : "learned"},
                {"epsilon_ent", agent.family.epsilon_ent},
                {"initial_t", agent.family.initial_t},
                {"max_t", agent.family.max_t},
                {"null_uses_action", agent.family.null_uses_action},
                {"reward_features", agent.reward_feature_set
                                        ? json(kFeatureSets[static_cast<std::size_t>(*agent.reward_feature_set)].names())
                                        : json(nullptr)},
                {"pinned", pins}};
  switch (macros.kind) {
    case MacroSpec::Kind::Atomic: j["macros"] = "atomic"; break;
    case MacroSpec::Kind::Fixed:
      j["macros"] = json::array();
      for (const auto& m : macros.fixed) j["macros"].push_back({action_name(*e, m.atomic), m.noops});
      break;
    case MacroSpec::Kind::Learned:
      j["macros"] = {{"learn",
                      {{"k_max", macros.learner.k_max},
                       {"threshold", macros.learner.threshold},
                       {"budget", macros.learner.budget_per_eval},
                       {"seed", macros.learner.seed}}}};
      break;
  }
  j["rollouts"] = rollouts;
  return j;
}

std::optional<int> episodes_to_consistent_goal(const std::vector<bool>& reached) {
  for (std::size_t e = 0; e + 2 < reached.size(); ++e) {
    if (reached[e] && reached[e + 1] && reached[e + 2]) return static_cast<int>(e) + 1;
  }
  return std::nullopt;
}

std::vector<MacroAction> resolve_macros(const ExperimentConfig& cfg) {
  switch (cfg.macros.kind) {
    case MacroSpec::Kind::Atomic: return {};
    case MacroSpec::Kind::Fixed: return cfg.macros.fixed;
    case MacroSpec::Kind::Learned: {
      auto env = make_environment(cfg.env);
      const auto learned = learn_macro_actions(*env, macro_candidates(*env), cfg.macros.learner);
      return complete_macro_set(*env, learned.macros);
    }
  }
  return {};
}

namespace {

std::vector<ResultRow> run_one(const ExperimentConfig& cfg, PlannerMode mode, std::uint64_t seed,
                               const std::vector<MacroAction>& macros, int rollouts) {
  auto env = make_environment(cfg.env);
  AgentConfig ac = cfg.agent;
  ac.planner.mode = mode;
  if (rollouts > 0) ac.planner.rollouts = rollouts;
  ac.macros = macros;
  SoorlAgent agent(*env, ac, splitmix64(seed));
  std::vector<ResultRow> rows;
  std::vector<bool> reached;
  for (int e = 1; e <= cfg.episodes; ++e) {
    const EpisodeStats st = agent.run_episode(*env, splitmix64(seed ^ (static_cast<std::uint64_t>(e) << 32)));
    ResultRow row;
    row.env = cfg.env;
    row.mode = mode;
    row.seed = seed;
    row.episode = e;
    row.episode_return = st.episode_return;
    row.steps = st.steps;
    row.reached_goal = st.reached_goal;
    row.model_backoffs = st.model_backoffs;
    row.selected_feature_sets = st.selected_feature_sets;
    rows.push_back(std::move(row));
    reached.push_back(st.reached_goal);
    if (cfg.stop_when_consistent && episodes_to_consistent_goal(reached)) break;
  }
  const auto metric = episodes_to_consistent_goal(reached);
  for (auto& r : rows) r.episodes_to_consistent_goal = metric;
  return rows;
}

struct Job {
  PlannerMode mode;
  std::uint64_t seed;
  int rollouts;
};

// Runs jobs on a bounded pool; results come back in job order.
std::vector<std::vector<ResultRow>> run_jobs(const ExperimentConfig& cfg, const std::vector<Job>& jobs,
                                             const std::vector<MacroAction>& macros) {
  std::vector<std::vector<ResultRow>> out(jobs.size());
  std::vector<std::exception_ptr> errors(jobs.size());
  std::atomic<std::size_t> next{0};
  auto work = [&] {
    for (std::size_t i = next++; i < jobs.size(); i = next++) {
      try {
        out[i] = run_one(cfg, jobs[i].mode, jobs[i].seed, macros, jobs[i].rollouts);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  const auto n = std::min<std::size_t>(static_cast<std::size_t>(cfg.workers), jobs.size());
  if (n <= 1) {
    work();
  } else {
    std::vector<std::thread> pool;
    for (std::size_t t = 0; t < n; ++t) pool.emplace_back(work);
    for (auto& t : pool) t.join();
  }
  for (const auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
  return out;
}

double mean_of(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x;
  return v.empty() ? 0.0 : s / static_cast<double>(v.size());
}

double sample_std(const std::vector<double>& v) {
  if (v.size() < 2) return 0.0;
  const double m = mean_of(v);
  double ss = 0.0;
  for (double x : v) ss += (x - m) * (x - m);
  return std::sqrt(ss / static_cast<double>(v.size() - 1));
}

std::ofstream open_out(const std::string& path) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError("cannot write '" + path + "'");
  return os;
}

}  // namespace

std::vector<ResultRow> run_rows(const ExperimentConfig& cfg) {
  const auto macros = resolve_macros(cfg);
  std::vector<Job> jobs;
  for (auto mode : cfg.modes) {
    for (auto seed : cfg.seeds) jobs.push_back({mode, seed, 0});
  }
  std::vector<ResultRow> rows;
  for (auto& block : run_jobs(cfg, jobs, macros)) rows.insert(rows.end(), block.begin(), block.end());
  return rows;
}

std::vector<SummaryRow> summarize(const std::vector<ResultRow>& rows, int episodes) {
  std::vector<PlannerMode> order;
  for (const auto& r : rows) {
    if (std::find(order.begin(), order.end(), r.mode) == order.end()) order.push_back(r.mode);
  }
  std::vector<SummaryRow> out;
  for (auto mode : order) {
    SummaryRow s;
    s.mode = mode;
    std::vector<double> metric, returns;
    std::set<std::uint64_t> seen;
    for (const auto& r : rows) {
      if (r.mode != mode) continue;
      returns.push_back(r.episode_return);
      if (!seen.insert(r.seed).second) continue;
      ++s.runs;
      if (r.episodes_to_consistent_goal) ++s.consistent_runs;
      metric.push_back(r.episodes_to_consistent_goal.value_or(episodes + 1));
    }
    s.mean_episodes_to_goal = mean_of(metric);
    s.std_episodes_to_goal = sample_std(metric);
    s.mean_return = mean_of(returns);
    s.std_return = sample_std(returns);
    out.push_back(s);
  }
  return out;
}

void write_rows_csv(std::ostream& os, const std::vector<ResultRow>& rows) {
  os << "# env,mode,seed,episode,return,steps,reached_goal,episodes_to_consistent_goal,model_backoffs,"
        "selected_feature_sets\n";
  for (const auto& r : rows) {
    os << r.env << ',' << to_string(r.mode) << ',' << r.seed << ',' << r.episode << ',' << num(r.episode_return)
       << ',' << r.steps << ',' << (r.reached_goal ? 1 : 0) << ',';
    if (r.episodes_to_consistent_goal) os << *r.episodes_to_consistent_goal;
    os << ',' << r.model_backoffs << ',' << r.selected_feature_sets << '\n';
  }
}

void write_summary_csv(std::ostream& os, const std::vector<SummaryRow>& summary) {
  os << "# mode,runs,consistent_runs,mean_episodes_to_consistent_goal,std_episodes_to_consistent_goal,"
        "mean_return,std_return\n";
  for (const auto& s : summary) {
    os << to_string(s.mode) << ',' << s.runs << ',' << s.consistent_runs << ',' << num(s.mean_episodes_to_goal)
       << ',' << num(s.std_episodes_to_goal) << ',' << num(s.mean_return) << ',' << num(s.std_return) << '\n';
  }
}

std::string output_dir(const ExperimentConfig& cfg) {
  if (const char* env = std::getenv("SOORL_OUT"); env && *env) return env;
  return cfg.output_dir;
}

ExperimentOutput run_experiment(const ExperimentConfig& cfg) {
  namespace fs = std::filesystem;
  const fs::path dir = output_dir(cfg);
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create '" + dir.string() + "': " + ec.message());

  ExperimentOutput out;
  out.config_path = (dir / "config.json").string();
  open_out(out.config_path) << cfg.to_json().dump(2) << '\n';

  out.rows = run_rows(cfg);
  out.summary = summarize(out.rows, cfg.episodes);
  out.rows_path = (dir / "rows.csv").string();
  out.summary_path = (dir / "summary.csv").string();
  auto rows_os = open_out(out.rows_path);
  write_rows_csv(rows_os, out.rows);
  auto summary_os = open_out(out.summary_path);
  write_summary_csv(summary_os, out.summary);
  if (!rows_os || !summary_os) throw IoError("write failed in '" + dir.string() + "'");
  return out;
}

ScalingOutput compare_rollout_scaling(const ExperimentConfig& cfg) {
  if (cfg.seeds.empty()) throw ConfigError("seeds", 0, "at least one seed is required");
  if (cfg.rollouts.empty()) throw ConfigError("rollouts", 0, "at least one rollout budget is required");
  for (std::size_t i = 1; i < cfg.rollouts.size(); ++i) {
    if (cfg.rollouts[i] <= cfg.rollouts[i - 1]) {
      throw ConfigError("rollouts", 0, "rollout budgets must strictly increase");
    }
  }
  namespace fs = std::filesystem;
  const fs::path dir = output_dir(cfg);
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create '" + dir.string() + "': " + ec.message());

  const auto macros = resolve_macros(cfg);
  std::vector<Job> jobs;
  for (int r : cfg.rollouts) {
    for (auto seed : cfg.seeds) jobs.push_back({PlannerMode::Optimism, seed, r});
  }
  const auto blocks = run_jobs(cfg, jobs, macros);

  ScalingOutput out;
  for (std::size_t b = 0; b < blocks.size(); ++b) {
    for (const auto& row : blocks[b]) {
      out.rows.push_back(row);
      out.row_rollouts.push_back(jobs[b].rollouts);
    }
  }
  for (int r : cfg.rollouts) {
    ScalingRow s;
    s.rollouts = r;
    s.runs = static_cast<int>(cfg.seeds.size());
    std::vector<double> returns;
    for (std::size_t i = 0; i < out.rows.size(); ++i) {
      if (out.row_rollouts[i] == r) returns.push_back(out.rows[i].episode_return);
    }
    s.mean_return = mean_of(returns);
    out.summary.push_back(s);
  }

  out.rows_path = (dir / "scaling_rows.csv").string();
  out.summary_path = (dir / "scaling.csv").string();
  auto rows_os = open_out(out.rows_path);
  rows_os << "# rollouts,seed,episode,return,steps\n";
  for (std::size_t i = 0; i < out.rows.size(); ++i) {
    const auto& r = out.rows[i];
    rows_os << out.row_rollouts[i] << ',' << r.seed << ',' << r.episode << ',' << num(r.episode_return) << ','
            << r.steps << '\n';
  }
  auto summary_os = open_out(out.summary_path);
  summary_os << "# rollouts,runs,mean_return\n";
  for (const auto& s : out.summary) summary_os << s.rollouts << ',' << s.runs << ',' << num(s.mean_return) << '\n';
  if (!rows_os || !summary_os) throw IoError("write failed in '" + dir.string() + "'");
  return out;
}

}  // namespace soorl
