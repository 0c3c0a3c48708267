#include "nudge/study.hpp"

#include <algorithm>
#include <atomic>
#include <charconv>
#include <cstdio>
#include <exception>
#include <fstream>
#include <istream>
#include <memory>
#include <mutex>
#include <set>
#include <sstream>
#include <stdexcept>
#include <thread>

#include <nlohmann/json.hpp>

namespace nudge {
namespace {

constexpr std::int64_t kMinutesPerWeek = 7LL * kMinutesPerDay;

std::uint64_t fnv1a(std::string_view s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string fmt(double v) {
  char buf[64];
  auto [end, ec] = std::to_chars(buf, buf + sizeof buf, v);
  if (ec != std::errc()) throw std::runtime_error("number formatting failed");
  return std::string(buf, end);
}

double rate(std::int64_t n, std::int64_t d) { return d == 0 ? 0.0 : static_cast<double>(n) / static_cast<double>(d); }

Phase phase_for(AgentKind kind, int week, const SupervisedConfig& sl) {
  switch (kind) {
    case AgentKind::RL: return Phase::RL;
    case AgentKind::SL: return week <= sl.training_weeks ? Phase::SLTrain : Phase::SLTest;
    case AgentKind::Fixed: return Phase::Fixed;
  }
  return Phase::Fixed;
}

struct Accumulator {
  WeeklyMetrics m;
  double confidence_sum = 0.0;
};

struct DayAccumulator {
  DailyMetrics d;
  double confidence_sum = 0.0;
};

// Bookkeeping shared by the resolution paths of the simulation loop.
class Recorder {
 public:
  Recorder(const StudyConfig& cfg, const StudyUser& user, const MicrotaskPool& pool, std::ostream* log)
      : cfg_(cfg), user_(user), pool_(pool), log_(log) {
    weeks_.resize(static_cast<std::size_t>(cfg.weeks));
    for (int w = 0; w < cfg.weeks; ++w) {
      weeks_[w].m.week = w + 1;
      weeks_[w].m.phase = phase_for(user.agent, w + 1, cfg.sl);
    }
    days_.resize(static_cast<std::size_t>(cfg.weeks) * 7);
    for (std::size_t d = 0; d < days_.size(); ++d) days_[d].d.day = static_cast<std::int64_t>(d);
  }

  void tick(const UserContext& ctx, const TickResult& t) {
    for (const auto& r : t.resolutions) resolution(r);
    if (t.forced == ForcedReason::Window) return;
    if (log_ && cfg_.write_event_logs) *log_ << decision_event(user_.id, ctx, t).dump() << '\n';
    if (!t.consulted()) return;
    auto& w = weeks_[t.minute / kMinutesPerWeek];
    auto& d = days_[t.minute / kMinutesPerDay];
    ++w.m.consulted;
    w.confidence_sum += t.confidence;
    ++d.d.consulted;
    d.confidence_sum += t.confidence;
    if (t.source == DecisionSource::A2C || t.source == DecisionSource::Forest) ++w.m.model_decisions;
    if (t.source == DecisionSource::Random) ++w.m.random_decisions;
    if (t.action == Action::Send) {
      ++w.m.sent;
      ++d.d.sent;
    }
    if (cfg_.keep_traces) trace_.push_back({t.minute, t.confidence, ctx.screen == Screen::On});
  }

  void resolution(const Resolution& r) {
    if (log_ && cfg_.write_event_logs) *log_ << resolution_event(user_.id, r).dump() << '\n';
    auto& w = weeks_[r.sent_at / kMinutesPerWeek].m;
    days_[r.sent_at / kMinutesPerDay].d.reward += r.reward;
    w.reward += r.reward;
    switch (r.outcome.kind) {
      case OutcomeKind::Answered: {
        ++w.answered;
        const Microtask& task = pool_.at(r.microtask_id);
        if (task.factual() && r.outcome.answer) {
          ++w.factual_answered;
          if (verify(task, *r.outcome.answer) == Verdict::Correct) ++w.correct;
        }
        break;
      }
      case OutcomeKind::Dismissed: ++w.dismissed; break;
      case OutcomeKind::Ignored: ++w.ignored; break;
    }
  }

  void finish(UserResult& out) {
    for (auto& a : weeks_) {
      a.m.answer_rate = rate(a.m.answered, a.m.sent);
      a.m.dismiss_rate = rate(a.m.dismissed, a.m.sent);
      a.m.accuracy = rate(a.m.correct, a.m.factual_answered);
      a.m.mean_confidence = a.m.consulted ? a.confidence_sum / static_cast<double>(a.m.consulted) : 0.0;
      out.weeks.push_back(a.m);
    }
    for (auto& a : days_) {
      a.d.mean_confidence = a.d.consulted ? a.confidence_sum / static_cast<double>(a.d.consulted) : 0.0;
      out.days.push_back(a.d);
    }
    out.trace = std::move(trace_);
  }

 private:
  const StudyConfig& cfg_;
  const StudyUser& user_;
  const MicrotaskPool& pool_;
  std::ostream* log_;
  std::vector<Accumulator> weeks_;
  std::vector<DayAccumulator> days_;
  std::vector<TracePoint> trace_;
};

void count_training(const std::vector<TrainMetrics>& v, UserResult& out) {
  for (const auto& m : v) {
    ++out.train_steps;
    if (m.fault) ++out.training_faults;
  }
}

MicrotaskPool make_pool(const StudyConfig& cfg) {
  return cfg.microtasks ? MicrotaskPool::load(*cfg.microtasks) : MicrotaskPool::default_pool();
}

}  // namespace

std::string_view to_string(AgentKind k) {
  switch (k) {
    case AgentKind::RL: return "rl";
    case AgentKind::SL: return "sl";
    case AgentKind::Fixed: return "fixed";
  }
  return "?";
}

AgentKind parse_agent_kind(std::string_view s) {
  if (s == "rl") return AgentKind::RL;
  if (s == "sl") return AgentKind::SL;
  if (s == "fixed") return AgentKind::Fixed;
  throw std::invalid_argument("unknown agent kind: " + std::string(s));
}

std::string_view to_string(Phase p) {
  switch (p) {
    case Phase::RL: return "rl";
    case Phase::SLTrain: return "sl_train";
    case Phase::SLTest: return "sl_test";
    case Phase::Fixed: return "fixed";
  }
  return "?";
}

Phase parse_phase(std::string_view s) {
  if (s == "rl") return Phase::RL;
  if (s == "sl_train") return Phase::SLTrain;
  if (s == "sl_test") return Phase::SLTest;
  if (s == "fixed") return Phase::Fixed;
  throw std::invalid_argument("unknown phase: " + std::string(s));
}

void validate(const StudyConfig& cfg) {
  if (cfg.weeks < 1) throw std::invalid_argument("weeks must be >= 1");
  if (cfg.start_day_of_week < 0 || cfg.start_day_of_week > 6)
    throw std::invalid_argument("start_day_of_week must be in [0, 6]");
  if (cfg.threads < 0) throw std::invalid_argument("threads must be >= 0");
  validate(cfg.engine);
  validate(cfg.reward);
  validate(cfg.a2c);
  std::set<std::string> ids;
  for (const auto& u : cfg.users) {
    if (u.id.empty()) throw std::invalid_argument("user id must be nonempty");
    if (u.id.find_first_of(",\"\n\r/\\") != std::string::npos || u.id == "." || u.id == "..")
      throw std::invalid_argument("user id contains a reserved character: " + u.id);
    if (!ids.insert(u.id).second) throw std::invalid_argument("duplicate user id: " + u.id);
    if (!(u.send_probability >= 0.0 && u.send_probability <= 1.0))
      throw std::invalid_argument("send_probability must be in [0, 1]");
    validate(u.profile);
  }
}

void to_json(nlohmann::json& j, const StudyConfig& cfg) {
  nlohmann::json users = nlohmann::json::array();
  for (const auto& u : cfg.users) {
    nlohmann::json e{{"id", u.id}, {"agent", to_string(u.agent)}, {"profile", profile_to_json(u.profile)}};
    if (u.agent == AgentKind::Fixed) e["send_probability"] = u.send_probability;
    users.push_back(e);
  }
  j = nlohmann::json{{"weeks", cfg.weeks},
                     {"seed", cfg.seed},
                     {"start_day_of_week", cfg.start_day_of_week},
                     {"engine", cfg.engine},
                     {"reward", cfg.reward},
                     {"a2c", cfg.a2c},
                     {"sl", cfg.sl},
                     {"write_event_logs", cfg.write_event_logs},
                     {"keep_traces", cfg.keep_traces},
                     {"threads", cfg.threads},
                     {"users", users}};
  if (cfg.microtasks) j["microtasks"] = *cfg.microtasks;
}

void from_json(const nlohmann::json& j, StudyConfig& cfg) {
  try {
    if (!j.is_object()) throw std::invalid_argument("study config must be an object");
    StudyConfig out;
    out.weeks = j.value("weeks", out.weeks);
    out.seed = j.value("seed", out.seed);
    out.start_day_of_week = j.value("start_day_of_week", out.start_day_of_week);
    if (j.contains("engine")) out.engine = j.at("engine").get<EngineConfig>();
    if (j.contains("reward")) out.reward = j.at("reward").get<RewardConfig>();
    if (j.contains("a2c")) out.a2c = j.at("a2c").get<Hyperparameters>();
    if (j.contains("sl")) out.sl = j.at("sl").get<SupervisedConfig>();
    if (j.contains("microtasks")) out.microtasks = j.at("microtasks").get<std::string>();
    out.write_event_logs = j.value("write_event_logs", out.write_event_logs);
    out.keep_traces = j.value("keep_traces", out.keep_traces);
    out.threads = j.value("threads", out.threads);
    for (const auto& e : j.at("users")) {
      // "count" expands one entry into id_1..id_n with identical settings.
      const int count = e.value("count", 0);
      StudyUser u;
      u.id = e.at("id").get<std::string>();
      u.agent = parse_agent_kind(e.value("agent", std::string("rl")));
      u.profile = profile_from_json(e.value("profile", nlohmann::json::object()));
      u.send_probability = e.value("send_probability", 0.0);
      if (count <= 0) {
        out.users.push_back(u);
      } else {
        for (int i = 1; i <= count; ++i) {
          StudyUser c = u;
          c.id = u.id + "_" + std::to_string(i);
          out.users.push_back(c);
        }
      }
    }
    validate(out);
    cfg = std::move(out);
  } catch (const nlohmann::json::exception& e) {
    throw std::invalid_argument(std::string("bad study config: ") + e.what());
  }
}

StudyConfig load_study_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open config: " + path.string());
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw std::invalid_argument(std::string("config is not valid JSON: ") + e.what());
  }
  return j.get<StudyConfig>();
}

UserResult run_user(const StudyConfig& cfg, std::size_t index, const MicrotaskPool& pool, std::ostream* log) {
  const StudyUser& user = cfg.users.at(index);
  const std::uint64_t user_seed = derive_seed(cfg.seed, fnv1a(user.id));
  Rng rng(derive_seed(user_seed, 1));
  const SimulatedUser sim(user.profile, derive_seed(user_seed, 3), cfg.start_day_of_week);

  std::unique_ptr<Policy> policy;
  A2CPolicy* a2c = nullptr;
  SupervisedPolicy* sl = nullptr;
  switch (user.agent) {
    case AgentKind::RL: {
      auto p = std::make_unique<A2CPolicy>(cfg.a2c, derive_seed(user_seed, 2));
      a2c = p.get();
      policy = std::move(p);
      break;
    }
    case AgentKind::SL: {
      auto p = std::make_unique<SupervisedPolicy>(cfg.sl, derive_seed(user_seed, 2));
      sl = p.get();
      policy = std::move(p);
      break;
    }
    case AgentKind::Fixed: policy = std::make_unique<FixedPolicy>(user.send_probability); break;
  }

  SchedulingEngine engine(cfg.engine, cfg.reward, pool);
  Recorder rec(cfg, user, pool, log);
  UserResult out;
  out.id = user.id;
  out.agent = user.agent;

  struct Planned {
    std::uint64_t id;
    Outcome outcome;
    std::int64_t at;
  };
  std::optional<Planned> planned;
  const std::int64_t horizon = static_cast<std::int64_t>(cfg.weeks) * kMinutesPerWeek;

  for (std::int64_t minute = 0; minute < horizon; ++minute) {
    if (planned && planned->at < minute) {
      const auto& pending = engine.state().pending;
      if (pending && pending->id == planned->id) {
        auto r = engine.resolve(planned->outcome, planned->at, *policy, planned->id);
        rec.resolution(r.resolution);
        count_training(r.training, out);
      }
      planned.reset();
    }
    const UserContext ctx = sim.step_context(minute, engine.elapsed_since_last_send(minute));
    const TickResult t = engine.tick(ctx, minute, *policy, rng);
    rec.tick(ctx, t);
    count_training(t.training, out);
    if (t.action == Action::Send) {
      const auto reaction = sim.respond(ctx, minute, &pool.at(*t.microtask_id));
      if (reaction.outcome.kind == OutcomeKind::Ignored) {
        planned.reset();
      } else {
        planned = Planned{*t.notification_id, reaction.outcome, minute + reaction.delay_minutes};
      }
    }
  }
  if (planned && planned->at < horizon) {
    const auto& pending = engine.state().pending;
    if (pending && pending->id == planned->id) {
      auto r = engine.resolve(planned->outcome, planned->at, *policy, planned->id);
      rec.resolution(r.resolution);
    }
  }
  if (auto r = engine.finish(horizon, *policy)) rec.resolution(*r);

  rec.finish(out);
  if (a2c) out.final_policy = a2c->state();
  if (sl) out.sl_phase_end = sl->phase_end();
  return out;
}

StudyResult run_study(const StudyConfig& cfg) {
  validate(cfg);
  const MicrotaskPool pool = make_pool(cfg);
  const std::size_t n = cfg.users.size();
  std::vector<UserResult> results(n);
  std::vector<std::exception_ptr> errors(n);

  const bool logs = cfg.output_dir && cfg.write_event_logs;
  std::filesystem::path log_dir;
  if (logs) {
    log_dir = std::filesystem::path(*cfg.output_dir) / "logs";
    std::filesystem::create_directories(log_dir);
  }

  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < n; i = next++) {
      try {
        if (logs) {
          const auto final_path = log_dir / (cfg.users[i].id + ".jsonl");
          auto tmp = final_path;
          tmp += ".tmp";
          {
            std::ofstream f(tmp, std::ios::binary | std::ios::trunc);
            if (!f) throw std::runtime_error("cannot write " + tmp.string());
            results[i] = run_user(cfg, i, pool, &f);
            f.flush();
            if (!f) throw std::runtime_error("write failed: " + tmp.string());
          }
          std::filesystem::rename(tmp, final_path);
        } else {
          results[i] = run_user(cfg, i, pool, nullptr);
        }
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };

  std::size_t threads = cfg.threads > 0 ? static_cast<std::size_t>(cfg.threads)
                                        : std::max(1u, std::thread::hardware_concurrency());
  threads = std::min(threads, std::max<std::size_t>(n, 1));
  std::vector<std::thread> pool_threads;
  for (std::size_t t = 1; t < threads; ++t) pool_threads.emplace_back(worker);
  worker();
  for (auto& t : pool_threads) t.join();
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);

  std::sort(results.begin(), results.end(), [](const UserResult& a, const UserResult& b) { return a.id < b.id; });
  return {std::move(results)};
}

ConfidenceTrace confidence_trace(std::istream& jsonl) {
  ConfidenceTrace out;
  std::string line;
  while (std::getline(jsonl, line)) {
    if (line.empty()) continue;
    const auto j = nlohmann::json::parse(line);
    const auto kind = j.at("event").get<std::string>();
    if (kind == "decision") {
      if (!j.at("confidence").is_null())
        out.points.emplace_back(j.at("minute").get<std::int64_t>(), j.at("confidence").get<double>());
    } else if (kind == "resolution") {
      out.daily_reward[j.at("sent_at").get<std::int64_t>() / kMinutesPerDay] += j.at("reward").get<double>();
    }
  }
  return out;
}

std::vector<WeeklyRow> weekly_rows(const StudyResult& result) {
  std::vector<WeeklyRow> rows;
  for (const auto& u : result.users)
    for (const auto& w : u.weeks) rows.push_back({u.id, u.agent, w});
  return rows;
}

namespace {

constexpr const char* kWeeklyHeader =
    "user,agent,week,phase,sent,answered,dismissed,ignored,answer_rate,dismiss_rate,reward,"
    "factual_answered,correct,accuracy,consulted,mean_confidence,model_decisions,random_decisions";

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : line) {
    if (c == ',') {
      out.push_back(cur);
      cur.clear();
    } else if (c != '\r') {
      cur.push_back(c);
    }
  }
  out.push_back(cur);
  return out;
}

template <typename T>
T parse_number(const std::string& s) {
  T v{};
  auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || p != s.data() + s.size()) throw std::invalid_argument("bad number in CSV: " + s);
  return v;
}

}  // namespace

std::string weekly_csv(const std::vector<WeeklyRow>& rows) {
  std::ostringstream o;
  o << kWeeklyHeader << '\n';
  for (const auto& r : rows) {
    const auto& m = r.metrics;
    o << r.user << ',' << to_string(r.agent) << ',' << m.week << ',' << to_string(m.phase) << ',' << m.sent << ','
      << m.answered << ',' << m.dismissed << ',' << m.ignored << ',' << fmt(m.answer_rate) << ','
      << fmt(m.dismiss_rate) << ',' << fmt(m.reward) << ',' << m.factual_answered << ',' << m.correct << ','
      << fmt(m.accuracy) << ',' << m.consulted << ',' << fmt(m.mean_confidence) << ',' << m.model_decisions << ','
      << m.random_decisions << '\n';
  }
  return o.str();
}

std::vector<WeeklyRow> parse_weekly_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw std::invalid_argument("empty weekly CSV");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != kWeeklyHeader) throw std::invalid_argument("unexpected weekly CSV header");
  std::vector<WeeklyRow> rows;
  while (std::getline(in, line)) {
    if (line.empty() || line == "\r") continue;
    const auto f = split_csv(line);
    if (f.size() != 18) throw std::invalid_argument("weekly CSV row has wrong field count");
    WeeklyRow r;
    r.user = f[0];
    r.agent = parse_agent_kind(f[1]);
    auto& m = r.metrics;
    m.week = parse_number<int>(f[2]);
    m.phase = parse_phase(f[3]);
    m.sent = parse_number<std::int64_t>(f[4]);
    m.answered = parse_number<std::int64_t>(f[5]);
    m.dismissed = parse_number<std::int64_t>(f[6]);
    m.ignored = parse_number<std::int64_t>(f[7]);
    m.answer_rate = parse_number<double>(f[8]);
    m.dismiss_rate = parse_number<double>(f[9]);
    m.reward = parse_number<double>(f[10]);
    m.factual_answered = parse_number<std::int64_t>(f[11]);
    m.correct = parse_number<std::int64_t>(f[12]);
    m.accuracy = parse_number<double>(f[13]);
    m.consulted = parse_number<std::int64_t>(f[14]);
    m.mean_confidence = parse_number<double>(f[15]);
    m.model_decisions = parse_number<std::int64_t>(f[16]);
    m.random_decisions = parse_number<std::int64_t>(f[17]);
    rows.push_back(r);
  }
  return rows;
}

nlohmann::json summarize(const std::vector<WeeklyRow>& rows) {
  nlohmann::json groups = nlohmann::json::object();
  for (Phase p : {Phase::RL, Phase::SLTrain, Phase::SLTest, Phase::Fixed}) {
    double n = 0, answered = 0, sent = 0, answer_rate = 0, dismiss_rate = 0, reward = 0, accuracy = 0, conf = 0;
    double accuracy_rows = 0;  // accuracy is undefined for weeks without factual answers
    for (const auto& r : rows) {
      if (r.metrics.phase != p) continue;
      const auto& m = r.metrics;
      n += 1;
      answered += static_cast<double>(m.answered);
      sent += static_cast<double>(m.sent);
      answer_rate += m.answer_rate;
      dismiss_rate += m.dismiss_rate;
      reward += m.reward;
      if (m.factual_answered > 0) {
        accuracy += m.accuracy;
        accuracy_rows += 1;
      }
      conf += m.mean_confidence;
    }
    if (n == 0) continue;
    groups[std::string(to_string(p))] = {{"rows", static_cast<int>(n)},
                                         {"answered", answered / n},
                                         {"sent", sent / n},
                                         {"answer_rate", answer_rate / n},
                                         {"dismiss_rate", dismiss_rate / n},
                                         {"reward", reward / n},
                                         {"accuracy", accuracy_rows > 0 ? accuracy / accuracy_rows : 0.0},
                                         {"accuracy_rows", static_cast<int>(accuracy_rows)},
                                         {"mean_confidence", conf / n}};
  }
  return {{"groups", groups}, {"rows", rows.size()}};
}

std::string format_summary(const nlohmann::json& summary) {
  std::ostringstream o;
  char buf[256];
  std::snprintf(buf, sizeof buf, "%-10s %5s %10s %10s %12s %12s %10s %10s\n", "group", "rows", "sent", "answered",
                "answer_rate", "dismiss_rate", "reward", "accuracy");
  o << buf;
  for (const auto& [name, g] : summary.at("groups").items()) {
    std::snprintf(buf, sizeof buf, "%-10s %5d %10.2f %10.2f %12.4f %12.4f %10.2f %10.4f\n", name.c_str(),
                  g.at("rows").get<int>(), g.at("sent").get<double>(), g.at("answered").get<double>(),
                  g.at("answer_rate").get<double>(), g.at("dismiss_rate").get<double>(),
                  g.at("reward").get<double>(), g.at("accuracy").get<double>());
    o << buf;
  }
  return o.str();
}

void write_atomic(const std::filesystem::path& path, std::string_view content) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream f(tmp, std::ios::binary | std::ios::trunc);
    if (!f) throw std::runtime_error("cannot write " + tmp.string());
    f.write(content.data(), static_cast<std::streamsize>(content.size()));
    f.flush();
    if (!f) throw std::runtime_error("write failed: " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

void write_report(const StudyResult& result, const StudyConfig& cfg, const std::filesystem::path& out) {
  std::filesystem::create_directories(out);
  const auto rows = weekly_rows(result);
  write_atomic(out / "weekly.csv", weekly_csv(rows));

  std::ostringstream daily;
  daily << "user,agent,day,sent,reward,consulted,mean_confidence\n";
  for (const auto& u : result.users)
    for (const auto& d : u.days)
      daily << u.id << ',' << to_string(u.agent) << ',' << d.day << ',' << d.sent << ',' << fmt(d.reward) << ','
            << d.consulted << ',' << fmt(d.mean_confidence) << '\n';
  write_atomic(out / "daily.csv", daily.str());

  write_atomic(out / "summary.json", summarize(rows).dump(2) + "\n");
  write_atomic(out / "config.json", nlohmann::json(cfg).dump(2) + "\n");

  if (cfg.keep_traces) {
    for (const auto& u : result.users) {
      std::ostringstream t;
      t << "minute,confidence,screen_on\n";
      for (const auto& p : u.trace) t << p.minute << ',' << fmt(p.confidence) << ',' << (p.screen_on ? 1 : 0) << '\n';
      write_atomic(out / "traces" / (u.id + ".csv"), t.str());
    }
  }
}

nlohmann::json report_from_dir(const std::filesystem::path& dir) {
  std::ifstream in(dir / "weekly.csv");
  if (!in) throw std::runtime_error("no weekly.csv in " + dir.string());
  const auto summary = summarize(parse_weekly_csv(in));
  write_atomic(dir / "summary.json", summary.dump(2) + "\n");
  return summary;
}

}  // namespace nudge
