#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include "doctest.h"
#include "flex/cli.hpp"
#include "support.hpp"

namespace fs = std::filesystem;

namespace {

struct Result {
  int code;
  std::string out;
  std::string err;
};

Result cli(std::vector<std::string> args) {
  args.insert(args.begin(), "flexdispatch");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  const int code = flex::run_cli(static_cast<int>(argv.size()), argv.data(), out, err);
  return {code, out.str(), err.str()};
}

fs::path scratch(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / "flex_cli_test";
  fs::create_directories(dir);
  return dir / name;
}

fs::path write(const std::string& name, const std::string& text) {
  const fs::path p = scratch(name);
  std::ofstream(p) << text;
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::set<std::string> columns(const std::string& csv) {
  std::set<std::string> cols;
  std::istringstream in(csv);
  std::string line;
  std::getline(in, line);
  while (std::getline(in, line)) {
    const auto a = line.find(',');
    const auto b = line.find(',', a + 1);
    cols.insert(line.substr(a + 1, b - a - 1));
  }
  return cols;
}

std::string scenario(double duration, const std::string& events = "[]") {
  return R"({"network": ")" + data_path("networks/lv7.json").string() + R"(", "duration": )" +
         std::to_string(duration) + R"(, "events": )" + events + "}";
}

}  // namespace

TEST_CASE("validate") {
  const auto ok = cli({"validate", "--network", data_path("networks/lv7.json").string()});
  CHECK(ok.code == flex::exit_ok);
  CHECK(ok.out.find("status: valid") != std::string::npos);

  std::string dup = two_bus_json();
  const std::string actor = dup.substr(dup.find("{\"id\": \"der\""));
  dup.replace(dup.find("\"actors\": [") + 11, 0, actor.substr(0, actor.find('}') + 1) + ",");
  const auto bad = cli({"validate", "--network", write("dup.json", dup).string()});
  CHECK(bad.code == flex::exit_validation);
  CHECK(bad.out.find("status: invalid") != std::string::npos);
  CHECK(bad.out.find("violation:") != std::string::npos);

  CHECK(cli({"validate", "--network", write("garbage.json", "{not json").string()}).code == flex::exit_parse);
  CHECK(cli({"validate", "--network", "/nonexistent/net.json"}).code == flex::exit_io);
  CHECK(cli({"validate"}).code == flex::exit_parse);
  CHECK(cli({"frobnicate"}).code == flex::exit_parse);
}

TEST_CASE("run with zero duration writes a header-only trace") {
  const fs::path out = scratch("zero.csv");
  const auto r = cli({"run", "--scenario", write("zero.json", scenario(0)).string(), "--out", out.string()});
  CHECK(r.code == flex::exit_ok);
  CHECK(slurp(out) == "time_s,kind,subject,field,value\n");
}

TEST_CASE("run against a missing network is a validation error") {
  const std::string text = R"({"network": "/nonexistent/net.json", "duration": 10, "events": []})";
  const auto r = cli({"run", "--scenario", write("missing.json", text).string(), "--out",
                      scratch("missing.csv").string()});
  CHECK(r.code == flex::exit_validation);
}

TEST_CASE("run outputs are idempotent and summarised") {
  const fs::path sc = write("reach.json", scenario(30, R"([{"time": 0, "kind": "set_point_request",
      "controller": "ofo2", "p_set": -8000}])"));
  const fs::path a = scratch("a.csv");
  const fs::path b = scratch("b.csv");
  CHECK(cli({"run", "--scenario", sc.string(), "--out", a.string(), "--jsonl"}).code == flex::exit_ok);
  CHECK(cli({"run", "--scenario", sc.string(), "--out", b.string(), "--serial"}).code == flex::exit_ok);
  CHECK(slurp(a) == slurp(b));
  CHECK(fs::exists(scratch("a.jsonl")));
  const std::string summary = slurp(scratch("a.summary.json"));
  CHECK(summary.find("\"requests\"") != std::string::npos);
  CHECK(summary.find("\"t1\"") != std::string::npos);

  const auto m = cli({"metrics", "--trace", a.string(), "--setpoint", "-8000", "--at", "30"});
  CHECK(m.code == flex::exit_ok);
  CHECK(m.out.find("subject: t1") != std::string::npos);
}

TEST_CASE("sensitivity dump") {
  const auto two = cli({"sensitivity", "--network", write("two.json", two_bus_json()).string()});
  CHECK(two.code == flex::exit_ok);
  CHECK(columns(two.out).size() == 2);

  const auto lv = cli({"sensitivity", "--network", data_path("networks/lv7.json").string()});
  CHECK(lv.code == flex::exit_ok);
  CHECK(columns(lv.out).size() == 4);

  const auto scoped = cli({"sensitivity", "--network", data_path("networks/lv7.json").string(),
                           "--controller", "ofo2", "--serial"});
  CHECK(scoped.code == flex::exit_ok);

  CHECK(cli({"sensitivity", "--network", data_path("networks/lv7.json").string(), "--delta", "0"}).code ==
        flex::exit_validation);
  CHECK(cli({"sensitivity", "--network", data_path("networks/lv7.json").string(), "--controller", "nope"})
            .code != flex::exit_ok);
}

TEST_CASE("metrics on a two-record trace") {
  const fs::path t = write("two.csv",
                           "time_s,kind,subject,field,value\n"
                           "0,measurement,t1,p_pcc,0\n"
                           "5,measurement,t1,p_pcc,9\n"
                           "10,measurement,t1,p_pcc,10\n");
  const auto at5 = cli({"metrics", "--trace", t.string(), "--setpoint", "10", "--at", "5"});
  CHECK(at5.code == flex::exit_ok);
  CHECK(at5.out.find("epsilon: 10.0%") != std::string::npos);
  const auto at10 = cli({"metrics", "--trace", t.string(), "--setpoint", "10", "--at", "10"});
  CHECK(at10.out.find("epsilon: 0.0%") != std::string::npos);
  CHECK(cli({"metrics", "--trace", write("bad.csv", "nope\n").string(), "--setpoint", "1", "--at", "1"}).code ==
        flex::exit_parse);
}
