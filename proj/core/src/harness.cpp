#include "bmfl/harness.hpp"

#include <algorithm>
#include <atomic>
#include <charconv>
#include <chrono>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>
#include <map>
#include <mutex>
#include <sstream>
#include <thread>

#include "bmfl/error.hpp"

namespace bmfl {

std::string_view to_string(SweepVar v) {
  switch (v) {
    case SweepVar::None: return "none";
    case SweepVar::SinrThreshold: return "sinrThreshold";
    case SweepVar::UserDensity: return "userDensity";
    case SweepVar::MsbsDensity: return "msbsDensity";
    case SweepVar::LearningRate: return "learningRate";
  }
  return "?";
}

std::string format_number(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[64];
  const auto r = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, r.ptr);
}

namespace {

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

std::vector<std::string> split_list(const std::string& v) {
  std::vector<std::string> out;
  std::string cur;
  std::istringstream is(v);
  while (std::getline(is, cur, ',')) {
    cur = trim(cur);
    if (!cur.empty()) out.push_back(cur);
  }
  return out;
}

struct Ctx {
  int line = 0;
  std::string key;
  [[noreturn]] void fail(const std::string& what) const {
    throw Error(ErrorCode::ParseError, "line " + std::to_string(line) + ": " + key + ": " + what);
  }
};

double to_double(const std::string& s, const Ctx& c) {
  double v = 0.0;
  const auto r = std::from_chars(s.data(), s.data() + s.size(), v);
  if (r.ec != std::errc{} || r.ptr != s.data() + s.size()) c.fail("expected a number, got '" + s + "'");
  return v;
}

long long to_int(const std::string& s, const Ctx& c) {
  long long v = 0;
  const auto r = std::from_chars(s.data(), s.data() + s.size(), v);
  if (r.ec != std::errc{} || r.ptr != s.data() + s.size()) c.fail("expected an integer, got '" + s + "'");
  return v;
}

bool to_bool(const std::string& s, const Ctx& c) {
  if (s == "true" || s == "1" || s == "yes" || s == "on") return true;
  if (s == "false" || s == "0" || s == "no" || s == "off") return false;
  c.fail("expected true/false, got '" + s + "'");
}

template <class E>
E to_enum(const std::string& s, std::initializer_list<std::pair<const char*, E>> names, const Ctx& c) {
  for (const auto& [n, e] : names) {
    if (s == n) return e;
  }
  std::string opts;
  for (const auto& [n, e] : names) opts += std::string(opts.empty() ? "" : "|") + n;
  c.fail("expected one of " + opts + ", got '" + s + "'");
}

template <class E>
std::string enum_name(E v, std::initializer_list<std::pair<const char*, E>> names) {
  for (const auto& [n, e] : names) {
    if (e == v) return n;
  }
  return "?";
}

const std::initializer_list<std::pair<const char*, Placement>> kPlacement = {
    {"uniform", Placement::Uniform}, {"grid", Placement::Grid}};
const std::initializer_list<std::pair<const char*, MobilityModel>> kMobility = {
    {"random_walk", MobilityModel::RandomWalk}, {"random_waypoint", MobilityModel::RandomWaypoint}};
const std::initializer_list<std::pair<const char*, InterferenceMode>> kInterference = {
    {"snr_only", InterferenceMode::SnrOnly}, {"full", InterferenceMode::Full}};
const std::initializer_list<std::pair<const char*, ShadowingMode>> kShadowing = {
    {"per_episode", ShadowingMode::PerEpisode}, {"per_slot", ShadowingMode::PerSlot}};
const std::initializer_list<std::pair<const char*, AssociationPolicy>> kAssociation = {
    {"max_power", AssociationPolicy::MaxPower}, {"load_balance", AssociationPolicy::LoadBalance}};
const std::initializer_list<std::pair<const char*, SweepVar>> kSweep = {
    {"none", SweepVar::None},
    {"sinrThreshold", SweepVar::SinrThreshold},
    {"userDensity", SweepVar::UserDensity},
    {"msbsDensity", SweepVar::MsbsDensity},
    {"learningRate", SweepVar::LearningRate}};
const std::initializer_list<std::pair<const char*, DataCount>> kDataCount = {
    {"participants", DataCount::ParticipantWeighted}, {"slots", DataCount::Slots}};

std::string join(const std::vector<std::string>& parts) {
  std::string out;
  for (const auto& p : parts) out += (out.empty() ? "" : ",") + p;
  return out;
}

struct Key {
  const char* name;
  std::function<void(ExperimentConfig&, const std::string&, const Ctx&)> set;
  std::function<std::string(const ExperimentConfig&)> get;
};

#define BMFL_NUM(key, field)                                                                 \
  Key {                                                                                      \
    key, [](ExperimentConfig& c, const std::string& v, const Ctx& x) { c.field = to_double(v, x); }, \
        [](const ExperimentConfig& c) { return format_number(c.field); }                     \
  }
#define BMFL_INT(key, field, type)                                                           \
  Key {                                                                                      \
    key,                                                                                     \
        [](ExperimentConfig& c, const std::string& v, const Ctx& x) {                        \
          c.field = static_cast<type>(to_int(v, x));                                         \
        },                                                                                   \
        [](const ExperimentConfig& c) { return std::to_string(c.field); }                    \
  }
#define BMFL_ENUM(key, field, table)                                                             \
  Key {                                                                                          \
    key, [](ExperimentConfig& c, const std::string& v, const Ctx& x) { c.field = to_enum(v, table, x); }, \
        [](const ExperimentConfig& c) { return enum_name(c.field, table); }                      \
  }

const std::vector<Key>& keys() {
  static const std::vector<Key> k = {
      // geometry and users
      BMFL_NUM("area_width", scenario.area.x),
      BMFL_NUM("area_height", scenario.area.y),
      BMFL_NUM("mbs_x", scenario.mbsPosition.x),
      BMFL_NUM("mbs_y", scenario.mbsPosition.y),
      BMFL_INT("msbs_count", msbsCount, int),
      BMFL_ENUM("placement", placement, kPlacement),
      BMFL_INT("sectors", sectors, int),
      BMFL_INT("beams", beams, int),
      BMFL_NUM("coverage_radius", coverageRadius),
      BMFL_INT("users", scenario.users, int),
      BMFL_INT("max_links_per_user", scenario.maxLinksPerUser, int),
      BMFL_NUM("sinr_threshold_db", scenario.sinrThresholdDb),
      BMFL_NUM("power_threshold_dbm", scenario.powerThresholdDbm),
      BMFL_NUM("slot_seconds", scenario.slotSeconds),
      BMFL_NUM("user_speed", scenario.userSpeed),
      BMFL_ENUM("mobility", scenario.mobility, kMobility),
      BMFL_ENUM("interference", scenario.interference, kInterference),
      BMFL_ENUM("shadowing", scenario.shadowing, kShadowing),
      BMFL_ENUM("association_policy", scenario.association, kAssociation),
      Key{"k1",
          [](ExperimentConfig& c, const std::string& v, const Ctx& x) {
            c.scenario.balance.k1 = to_double(v, x);
            c.scenario.balance.k2 = 1.0 - c.scenario.balance.k1;
          },
          [](const ExperimentConfig& c) { return format_number(c.scenario.balance.k1); }},
      // radio
      BMFL_NUM("kappa", scenario.radio.kappa),
      BMFL_NUM("rho", scenario.radio.rho),
      BMFL_NUM("mmwave_alpha", scenario.radio.alpha),
      BMFL_NUM("mmwave_beta", scenario.radio.beta),
      BMFL_NUM("sigma2", scenario.radio.sigma2),
      BMFL_NUM("gain_tx_db", scenario.radio.gT),
      BMFL_NUM("gain_rx_db", scenario.radio.gR),
      BMFL_NUM("p_mbs_dbm", scenario.radio.pMbs),
      BMFL_NUM("p_sbs_dbm", scenario.radio.pSbs),
      BMFL_NUM("w_mbs_hz", scenario.radio.wMbs),
      BMFL_NUM("w_mm_hz", scenario.radio.wMm),
      BMFL_NUM("f_mbs_hz", scenario.radio.fMbs),
      BMFL_NUM("f_mm_hz", scenario.radio.fMm),
      BMFL_NUM("noise_figure_db", scenario.radio.noiseFigure),
      // learning
      BMFL_NUM("discount", hp.gamma),
      BMFL_NUM("learning_rate", hp.alpha),
      Key{"local_step",
          [](ExperimentConfig& c, const std::string& v, const Ctx& x) {
            c.hp.lambda = to_double(v, x);
            c.localStepSet = true;
          },
          [](const ExperimentConfig& c) { return format_number(c.localStepSet ? c.hp.lambda : c.hp.alpha); }},
      BMFL_INT("target_interval", hp.targetInterval, int),
      BMFL_INT("minibatch", hp.minibatch, std::size_t),
      BMFL_NUM("grad_clip", hp.gradClip),
      BMFL_INT("replay_capacity", hp.replayCapacity, std::size_t),
      BMFL_NUM("epsilon_start", hp.epsilon.start),
      BMFL_NUM("epsilon_decay", hp.epsilon.decay),
      BMFL_NUM("epsilon_floor", hp.epsilon.floor),
      Key{"bootstrap_last_slot",
          [](ExperimentConfig& c, const std::string& v, const Ctx& x) { c.hp.bootstrapLastSlot = to_bool(v, x); },
          [](const ExperimentConfig& c) { return std::string(c.hp.bootstrapLastSlot ? "true" : "false"); }},
      Key{"hidden",
          [](ExperimentConfig& c, const std::string& v, const Ctx& x) {
            c.hp.hidden.clear();
            for (const auto& p : split_list(v)) {
              const auto n = to_int(p, x);
              if (n < 1) x.fail("hidden layer widths must be >= 1");
              c.hp.hidden.push_back(static_cast<std::size_t>(n));
            }
          },
          [](const ExperimentConfig& c) {
            std::vector<std::string> p;
            for (auto h : c.hp.hidden) p.push_back(std::to_string(h));
            return join(p);
          }},
      BMFL_NUM("reward_scale", fed.rewardScale),
      // federation
      BMFL_INT("rounds", fed.rounds, int),
      BMFL_INT("slots_per_round", fed.slotsPerRound, int),
      BMFL_NUM("eta", fed.eta),
      BMFL_ENUM("data_count", fed.dataCount, kDataCount),
      // experiment
      Key{"scheme",
          [](ExperimentConfig& c, const std::string& v, const Ctx& x) {
            c.schemes.clear();
            for (const auto& p : split_list(v)) {
              const auto s = parse_scheme(p);
              if (!s) x.fail("unknown scheme '" + p + "'");
              c.schemes.push_back(*s);
            }
            if (c.schemes.empty()) x.fail("scheme list is empty");
          },
          [](const ExperimentConfig& c) {
            std::vector<std::string> p;
            for (auto s : c.schemes) p.emplace_back(to_string(s));
            return join(p);
          }},
      BMFL_ENUM("sweep", sweep, kSweep),
      Key{"values",
          [](ExperimentConfig& c, const std::string& v, const Ctx& x) {
            c.values.clear();
            for (const auto& p : split_list(v)) c.values.push_back(to_double(p, x));
          },
          [](const ExperimentConfig& c) {
            std::vector<std::string> p;
            for (double v : c.values) p.push_back(format_number(v));
            return join(p);
          }},
      BMFL_INT("replications", replications, int),
      BMFL_INT("seed", seed, std::uint64_t),
      BMFL_INT("eval_slots", evalSlots, int),
      BMFL_INT("bfs_budget", bfsBudget, std::uint64_t),
      BMFL_INT("bmcl_action_budget", bmclActionBudget, std::uint64_t),
      BMFL_INT("threads", threads, int),
      Key{"output", [](ExperimentConfig& c, const std::string& v, const Ctx&) { c.output = v; },
          [](const ExperimentConfig& c) { return c.output; }},
  };
  return k;
}

#undef BMFL_NUM
#undef BMFL_INT
#undef BMFL_ENUM

void range(bool ok, const std::string& what) {
  if (!ok) throw Error(ErrorCode::RangeError, what);
}

}  // namespace

void ExperimentConfig::validate() const {
  scenario.radio.validate();
  range(hp.gamma >= 0.0 && hp.gamma <= 1.0, "discount must lie in [0,1]");
  hp.validate();
  fed.validate();
  range(scenario.users >= 1, "users must be >= 1");
  range(msbsCount >= 1, "msbs_count must be >= 1");
  range(sectors >= 1 && sectors <= SectorSet::kMaxSectors, "sectors must lie in [1,64]");
  range(beams >= 1 && beams <= sectors, "beams must satisfy 0 < beams <= sectors");
  range(coverageRadius > 0.0, "coverage_radius must be positive");
  range(scenario.maxLinksPerUser >= 1, "max_links_per_user must be >= 1");
  range(scenario.area.x > 0.0 && scenario.area.y > 0.0, "area must be positive");
  range(scenario.slotSeconds > 0.0, "slot_seconds must be positive");
  range(scenario.userSpeed >= 0.0, "user_speed must be >= 0");
  if (scenario.association == AssociationPolicy::LoadBalance) scenario.balance.validate();
  range(replications >= 1, "replications must be >= 1");
  range(evalSlots >= 1, "eval_slots must be >= 1");
  range(threads >= 1, "threads must be >= 1");
  range(!schemes.empty(), "scheme list is empty");
  range(sweep == SweepVar::None || !values.empty(), "a sweep needs a non-empty value list");
}

ExperimentConfig parse_config(std::string_view text) {
  ExperimentConfig cfg;
  std::map<std::string, const Key*, std::less<>> table;
  for (const auto& k : keys()) table.emplace(k.name, &k);

  std::istringstream is{std::string(text)};
  std::string raw;
  Ctx ctx;
  while (std::getline(is, raw)) {
    ++ctx.line;
    std::string line = raw.substr(0, raw.find('#'));
    std::istringstream stmts(line);
    std::string stmt;
    while (std::getline(stmts, stmt, ';')) {
      stmt = trim(stmt);
      if (stmt.empty()) continue;
      const auto eq = stmt.find('=');
      ctx.key = trim(stmt.substr(0, eq));
      if (eq == std::string::npos) ctx.fail("expected 'key = value'");
      const std::string value = trim(stmt.substr(eq + 1));
      if (ctx.key.empty()) ctx.fail("missing key");
      const auto it = table.find(ctx.key);
      if (it == table.end()) {
        throw Error(ErrorCode::UnknownKey, "line " + std::to_string(ctx.line) + ": unknown key '" + ctx.key + "'");
      }
      if (value.empty()) ctx.fail("missing value");
      it->second->set(cfg, value, ctx);
    }
  }
  if (!cfg.localStepSet) cfg.hp.lambda = cfg.hp.alpha;
  cfg.validate();
  return cfg;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::IoError, "cannot open config " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str());
}

std::string format_config(const ExperimentConfig& cfg) {
  std::ostringstream os;
  for (const auto& k : keys()) {
    const auto v = k.get(cfg);
    if (!v.empty()) os << k.name << " = " << v << '\n';  // an empty list keeps its default
  }
  return os.str();
}

RunPoint build_point(const ExperimentConfig& cfg, double sweepValue, std::uint64_t seed) {
  RunPoint p;
  p.scenario = cfg.scenario;
  p.hp = cfg.hp;
  if (!cfg.localStepSet) p.hp.lambda = p.hp.alpha;
  int msbsCount = cfg.msbsCount;
  const double areaKm2 = (cfg.scenario.area.x / 1000.0) * (cfg.scenario.area.y / 1000.0);
  switch (cfg.sweep) {
    case SweepVar::None: break;
    case SweepVar::SinrThreshold: p.scenario.sinrThresholdDb = sweepValue; break;
    case SweepVar::UserDensity:
      p.scenario.users = static_cast<int>(std::lround(sweepValue * areaKm2));
      break;
    case SweepVar::MsbsDensity: msbsCount = static_cast<int>(std::lround(sweepValue * areaKm2)); break;
    case SweepVar::LearningRate:
      p.hp.alpha = sweepValue;
      if (!cfg.localStepSet) p.hp.lambda = sweepValue;
      break;
  }
  range(p.scenario.users >= 1, "sweep value yields no users");
  range(msbsCount >= 1, "sweep value yields no mSBS");
  p.scenario.seed = seed;
  place_msbs(p.scenario, msbsCount, cfg.placement, cfg.sectors, cfg.beams, cfg.coverageRadius);
  p.scenario.validate();
  p.hp.validate();
  return p;
}

ExperimentResult run_experiment(const ExperimentConfig& cfg, const ProgressFn& progress,
                                ExperimentResult* partial) {
  cfg.validate();
  struct Job {
    double value;
    int rep;
    SchemeId scheme;
  };
  std::vector<Job> jobs;
  const std::vector<double> values = cfg.sweep == SweepVar::None ? std::vector<double>{0.0} : cfg.values;
  for (double v : values) {
    for (int r = 0; r < cfg.replications; ++r) {
      for (SchemeId s : cfg.schemes) jobs.push_back(Job{v, r, s});
    }
  }

  ExperimentResult res;
  res.runs.resize(jobs.size());
  std::mutex mu;
  std::exception_ptr firstError;
  std::atomic<std::size_t> next{0};
  std::vector<char> done(jobs.size(), 0);

  const auto worker = [&] {
    while (true) {
      const std::size_t i = next.fetch_add(1);
      if (i >= jobs.size()) return;
      {
        std::lock_guard lock(mu);
        if (firstError) return;
      }
      try {
        const Job& j = jobs[i];
        const std::uint64_t seed = cfg.seed + static_cast<std::uint64_t>(j.rep);
        const RunPoint p = build_point(cfg, j.value, seed);
        SchemeOptions opt;
        opt.fed = cfg.fed;
        opt.evalSlots = cfg.evalSlots;
        opt.bfsBudget = cfg.bfsBudget;
        opt.bmclActionBudget = cfg.bmclActionBudget;
        const auto t0 = std::chrono::steady_clock::now();
        SchemeOutcome o = run_scheme(j.scheme, p.scenario, p.hp, opt);
        const auto t1 = std::chrono::steady_clock::now();
        RunRecord rec;
        rec.row.scheme = std::string(to_string(j.scheme));
        rec.row.sweepValue = j.value;
        rec.row.replication = j.rep;
        rec.row.seed = seed;
        rec.row.coverageFraction = o.meanCoverage;
        rec.row.throughputBps = o.meanThroughputBps;
        rec.row.meanLossFinal = o.meanLossFinal;
        rec.row.envSlots = o.envSlots;
        rec.row.complexityEstimate = complexity_estimate(p.scenario, cfg.fed.rounds, cfg.fed.slotsPerRound);
        rec.row.wallTimeMs = std::chrono::duration<double, std::milli>(t1 - t0).count();
        rec.outcome = std::move(o);
        std::lock_guard lock(mu);
        res.runs[i] = std::move(rec);
        done[i] = 1;
        if (progress) progress(res.runs[i].row);
      } catch (...) {
        std::lock_guard lock(mu);
        if (!firstError) firstError = std::current_exception();
        return;
      }
    }
  };

  const int threads = std::max(1, std::min<int>(cfg.threads, static_cast<int>(jobs.size())));
  if (threads == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (int t = 0; t < threads; ++t) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }
  if (firstError) {
    // Keep the completed prefix so callers can flush partial results.
    std::size_t n = 0;
    while (n < done.size() && done[n]) ++n;
    res.runs.resize(n);
    if (partial) *partial = std::move(res);
    std::rethrow_exception(firstError);
  }
  return res;
}

void write_metrics_csv(std::ostream& os, const std::vector<MetricsRow>& rows) {
  os << "scheme,sweepValue,replication,seed,coverageFraction,throughputBps,meanLossFinal,envSlots,"
        "complexityEstimate\n";
  for (const auto& r : rows) {
    os << r.scheme << ',' << format_number(r.sweepValue) << ',' << r.replication << ',' << r.seed << ','
       << format_number(r.coverageFraction) << ',' << format_number(r.throughputBps) << ','
       << format_number(r.meanLossFinal) << ',' << r.envSlots << ',' << r.complexityEstimate << '\n';
  }
}

namespace {

void open_out(std::ofstream& os, const std::filesystem::path& p) {
  os.open(p, std::ios::binary);
  if (!os) throw Error(ErrorCode::IoError, "cannot write " + p.string());
}

}  // namespace

void write_outputs(const ExperimentConfig& cfg, const ExperimentResult& res,
                   const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw Error(ErrorCode::IoError, "cannot create " + dir.string() + ": " + ec.message());

  std::vector<MetricsRow> rows;
  for (const auto& r : res.runs) rows.push_back(r.row);
  {
    std::ofstream os;
    open_out(os, dir / "metrics.csv");
    write_metrics_csv(os, rows);
  }
  {
    std::ofstream os;
    open_out(os, dir / "timing.csv");
    os << "scheme,sweepValue,replication,wallTimeMs\n";
    for (const auto& r : rows) {
      os << r.scheme << ',' << format_number(r.sweepValue) << ',' << r.replication << ','
         << format_number(r.wallTimeMs) << '\n';
    }
  }
  {
    std::ofstream os;
    open_out(os, dir / "eval_slots.csv");
    os << "scheme,sweepValue,replication,slot,throughputBps,coverage\n";
    for (const auto& r : res.runs) {
      for (const auto& e : r.outcome.eval) {
        os << r.row.scheme << ',' << format_number(r.row.sweepValue) << ',' << r.row.replication << ','
           << e.slot << ',' << format_number(e.throughputBps) << ',' << format_number(e.coverage) << '\n';
      }
    }
  }
  const bool trained = std::any_of(res.runs.begin(), res.runs.end(),
                                   [](const RunRecord& r) { return !r.outcome.trace.rows.empty(); });
  if (trained) {
    std::ofstream os;
    open_out(os, dir / "loss_trace.csv");
    os << "scheme,sweepValue,replication,round,slot,msbsId,loss,reward,coverage,throughputBps\n";
    for (const auto& r : res.runs) {
      const std::string prefix = r.row.scheme + ',' + format_number(r.row.sweepValue) + ',' +
                                 std::to_string(r.row.replication) + ',';
      for (const auto& t : r.outcome.trace.rows) {
        os << prefix << t.round << ',' << t.slot << ',' << t.msbsId << ',' << format_number(t.loss) << ','
           << format_number(t.reward) << ',' << format_number(t.coverage) << ','
           << format_number(t.throughputBps) << '\n';
      }
    }
  }
  {
    std::ofstream os;
    open_out(os, dir / "config_resolved.txt");
    os << format_config(cfg);
  }
}

namespace {

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  std::istringstream is(line);
  while (std::getline(is, cur, ',')) out.push_back(trim(cur));
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

double parse_num(const std::string& s, int line) {
  if (s == "nan") return std::numeric_limits<double>::quiet_NaN();
  if (s == "inf") return std::numeric_limits<double>::infinity();
  if (s == "-inf") return -std::numeric_limits<double>::infinity();
  double v = 0.0;
  const auto r = std::from_chars(s.data(), s.data() + s.size(), v);
  if (r.ec != std::errc{} || r.ptr != s.data() + s.size()) {
    throw Error(ErrorCode::ParseError, "metrics line " + std::to_string(line) + ": bad number '" + s + "'");
  }
  return v;
}

}  // namespace

std::vector<MetricsRow> read_metrics_csv(std::istream& is) {
  std::string line;
  if (!std::getline(is, line)) throw Error(ErrorCode::EmptyInput, "metrics file is empty");
  const auto header = split_csv(line);
  std::map<std::string, std::size_t> col;
  for (std::size_t i = 0; i < header.size(); ++i) col[header[i]] = i;
  for (const char* need : {"scheme", "sweepValue", "replication", "coverageFraction", "throughputBps"}) {
    if (!col.count(need)) throw Error(ErrorCode::ParseError, std::string("metrics header lacks '") + need + "'");
  }
  const auto get = [&](const std::vector<std::string>& f, const char* name) -> const std::string* {
    const auto it = col.find(name);
    if (it == col.end() || it->second >= f.size()) return nullptr;
    return &f[it->second];
  };
  std::vector<MetricsRow> rows;
  int n = 1;
  while (std::getline(is, line)) {
    ++n;
    if (trim(line).empty()) continue;
    const auto f = split_csv(line);
    if (f.size() != header.size()) {
      throw Error(ErrorCode::ParseError, "metrics line " + std::to_string(n) + ": expected " +
                                             std::to_string(header.size()) + " fields");
    }
    MetricsRow r;
    r.scheme = *get(f, "scheme");
    r.sweepValue = parse_num(*get(f, "sweepValue"), n);
    r.replication = static_cast<int>(parse_num(*get(f, "replication"), n));
    if (const auto* s = get(f, "seed")) r.seed = static_cast<std::uint64_t>(parse_num(*s, n));
    r.coverageFraction = parse_num(*get(f, "coverageFraction"), n);
    r.throughputBps = parse_num(*get(f, "throughputBps"), n);
    if (const auto* s = get(f, "meanLossFinal")) r.meanLossFinal = parse_num(*s, n);
    if (const auto* s = get(f, "envSlots")) r.envSlots = static_cast<std::int64_t>(parse_num(*s, n));
    if (const auto* s = get(f, "complexityEstimate")) r.complexityEstimate = static_cast<std::int64_t>(parse_num(*s, n));
    rows.push_back(std::move(r));
  }
  return rows;
}

std::vector<MetricsRow> read_metrics_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::IoError, "cannot open " + path.string());
  return read_metrics_csv(in);
}

namespace {

void mean_sd(const std::vector<double>& v, double& mean, double& sd) {
  std::vector<double> x;
  for (double d : v) {
    if (!std::isnan(d)) x.push_back(d);
  }
  if (x.empty()) {
    mean = sd = std::numeric_limits<double>::quiet_NaN();
    return;
  }
  double s = 0.0;
  for (double d : x) s += d;
  mean = s / static_cast<double>(x.size());
  if (x.size() < 2) {
    sd = 0.0;
    return;
  }
  double ss = 0.0;
  for (double d : x) ss += (d - mean) * (d - mean);
  sd = std::sqrt(ss / static_cast<double>(x.size() - 1));
}

}  // namespace

std::vector<SummaryRow> summarize(const std::vector<MetricsRow>& rows) {
  if (rows.empty()) throw Error(ErrorCode::EmptyInput, "no rows to summarize");
  struct Acc {
    std::vector<double> cov, thr, loss;
  };
  std::vector<std::pair<std::string, double>> order;
  std::map<std::pair<std::string, double>, Acc> groups;
  for (const auto& r : rows) {
    const auto key = std::make_pair(r.scheme, r.sweepValue);
    auto [it, fresh] = groups.try_emplace(key);
    if (fresh) order.push_back(key);
    it->second.cov.push_back(r.coverageFraction);
    it->second.thr.push_back(r.throughputBps);
    it->second.loss.push_back(r.meanLossFinal);
  }
  std::vector<SummaryRow> out;
  for (const auto& key : order) {
    const Acc& a = groups.at(key);
    SummaryRow s;
    s.scheme = key.first;
    s.sweepValue = key.second;
    s.n = static_cast<int>(a.cov.size());
    mean_sd(a.cov, s.coverageMean, s.coverageSd);
    mean_sd(a.thr, s.throughputMean, s.throughputSd);
    mean_sd(a.loss, s.lossMean, s.lossSd);
    out.push_back(s);
  }
  return out;
}

void write_summary_csv(std::ostream& os, const std::vector<SummaryRow>& rows) {
  os << "scheme,sweepValue,n,coverageMean,coverageSd,throughputMean,throughputSd,lossMean,lossSd\n";
  for (const auto& r : rows) {
    os << r.scheme << ',' << format_number(r.sweepValue) << ',' << r.n << ',' << format_number(r.coverageMean)
       << ',' << format_number(r.coverageSd) << ',' << format_number(r.throughputMean) << ','
       << format_number(r.throughputSd) << ',' << format_number(r.lossMean) << ',' << format_number(r.lossSd)
       << '\n';
  }
}

void write_summary_text(std::ostream& os, const std::vector<SummaryRow>& rows) {
  const auto pm = [](double m, double sd, int prec) {
    std::ostringstream s;
    s << std::fixed << std::setprecision(prec) << m << " +- " << sd;
    return s.str();
  };
  os << std::left << std::setw(6) << "scheme" << ' ' << std::right << std::setw(10) << "value" << ' '
     << std::setw(4) << "n" << "  " << std::setw(20) << "coverage" << "  " << std::setw(26)
     << "throughput (Mbit/s)" << "  " << std::setw(22) << "final loss" << '\n';
  for (const auto& r : rows) {
    os << std::left << std::setw(6) << r.scheme << ' ' << std::right << std::setw(10)
       << format_number(r.sweepValue) << ' ' << std::setw(4) << r.n << "  " << std::setw(20)
       << pm(r.coverageMean, r.coverageSd, 4) << "  " << std::setw(26)
       << pm(r.throughputMean / 1e6, r.throughputSd / 1e6, 1) << "  " << std::setw(22)
       << (std::isnan(r.lossMean) ? std::string("-") : pm(r.lossMean, r.lossSd, 5)) << '\n';
  }
}

}  // namespace bmfl
