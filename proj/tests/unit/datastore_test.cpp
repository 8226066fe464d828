#include <gtest/gtest.h>
#include <sys/wait.h>
#include <unistd.h>

#include <random>

#include "lensloop/datastore.hpp"
#include "lensloop/error.hpp"
#include "test_support.hpp"

namespace lensloop {
namespace {

using testing::TempDir;

std::vector<SftRecord> synthetic(std::size_t n, unsigned seed) {
  std::mt19937 rng(seed);
  const std::vector<std::string> pieces = {"mug", "\n", "\"q\"", "\\", "\t", "caf\xc3\xa9", "{x}", " ", "[ B001 ]"};
  const auto text = [&] {
    std::string s;
    const int len = std::uniform_int_distribution<int>(1, 8)(rng);
    for (int i = 0; i < len; ++i) s += pieces[rng() % pieces.size()];
    return s;
  };
  std::vector<SftRecord> out;
  for (std::size_t i = 0; i < n; ++i) {
    out.push_back(SftRecord{text(), text(), text(), text(), static_cast<int>(rng() % 4), rng() % 2 == 0,
                            StepRef{"t" + std::to_string(i % 7) + "-abc", static_cast<int>(i % 5)}});
  }
  return out;
}

ErrorCode code_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "no error thrown";
  return ErrorCode::ConfigError;
}

TEST(Datastore, RoundTripIsByteIdentical) {
  TempDir dir;
  const auto records = synthetic(1000, 3);
  append_records(dir / "a.jsonl", records);
  const auto loaded = load_records(dir / "a.jsonl");
  EXPECT_EQ(loaded, records);
  append_records(dir / "b.jsonl", loaded);
  EXPECT_EQ(testing::slurp(dir / "a.jsonl"), testing::slurp(dir / "b.jsonl"));
}

TEST(Datastore, EmbeddedNewlinesStayOnOneLine) {
  TempDir dir;
  const std::vector<SftRecord> records{SftRecord{"a\nb", "None", "x\r\ny", "t", 1, false, {"id", 0}}};
  append_records(dir / "d.jsonl", records);
  const std::string text = testing::slurp(dir / "d.jsonl");
  EXPECT_EQ(std::count(text.begin(), text.end(), '\n'), 2);
  EXPECT_EQ(load_records(dir / "d.jsonl"), records);
}

TEST(Datastore, AppendsAcrossCalls) {
  TempDir dir;
  const auto records = synthetic(10, 9);
  append_records(dir / "d.jsonl", std::span(records).first(4));
  append_records(dir / "d.jsonl", std::span(records).subspan(4));
  EXPECT_EQ(load_records(dir / "d.jsonl"), records);

  RecordReader reader(dir / "d.jsonl");
  std::size_t n = 0;
  while (auto r = reader.next()) EXPECT_EQ(*r, records[n++]);
  EXPECT_EQ(n, records.size());
}

TEST(Datastore, EmptyDatasetFile) {
  TempDir dir;
  append_records(dir / "e.jsonl", {});
  EXPECT_TRUE(load_records(dir / "e.jsonl").empty());
  EXPECT_EQ(testing::slurp(dir / "e.jsonl"), "{\"kind\":\"sft_dataset\",\"schema_version\":1}\n");
}

TEST(Datastore, CorruptedLinesReportedByNumber) {
  TempDir dir;
  append_records(dir / "c.jsonl", synthetic(20, 4));
  std::istringstream in(testing::slurp(dir / "c.jsonl"));
  std::string out;
  std::size_t number = 0;
  for (std::string line; std::getline(in, line);) {
    ++number;
    if (number == 5) line = line.substr(0, line.size() / 2);
    if (number == 12) line = R"({"goal":"x"})";
    if (number == 17) line += "garbage";
    out += line + "\n";
  }
  testing::write_text(dir / "c.jsonl", out);
  try {
    load_records(dir / "c.jsonl");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::MalformedLine);
    EXPECT_EQ(e.indices(), (std::vector<std::size_t>{5, 12, 17}));
  }
  RecordReader reader(dir / "c.jsonl");
  try {
    while (reader.next()) {
    }
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.indices(), (std::vector<std::size_t>{5}));
  }
}

TEST(Datastore, RecordKeysMustBeExact) {
  auto j = nlohmann::json(synthetic(1, 1)[0]);
  j["extra"] = 1;
  EXPECT_THROW(j.get<SftRecord>(), std::exception);
}

TEST(Datastore, HeaderChecks) {
  TempDir dir;
  testing::write_text(dir / "v.jsonl", "{\"kind\":\"sft_dataset\",\"schema_version\":2}\n");
  EXPECT_EQ(code_of([&] { load_records(dir / "v.jsonl"); }), ErrorCode::SchemaVersionMismatch);
  EXPECT_EQ(code_of([&] { append_records(dir / "v.jsonl", synthetic(1, 1)); }), ErrorCode::SchemaVersionMismatch);
  append_trajectories(dir / "t.jsonl", {});
  EXPECT_EQ(code_of([&] { load_records(dir / "t.jsonl"); }), ErrorCode::SchemaError);
  EXPECT_EQ(code_of([&] { append_records(dir / "t.jsonl", synthetic(1, 1)); }), ErrorCode::SchemaError);
  EXPECT_EQ(code_of([&] { load_records(dir / "missing.jsonl"); }), ErrorCode::IoError);
}

TEST(Datastore, InvalidUtf8IsRejected) {
  TempDir dir;
  std::vector<SftRecord> records = synthetic(1, 2);
  records[0].target = "bad \xff byte";
  EXPECT_EQ(code_of([&] { append_records(dir / "u.jsonl", records); }), ErrorCode::SchemaError);
}

TEST(Datastore, WriterLockExcludesOtherProcesses) {
  TempDir dir;
  const auto file = dir / "locked.jsonl";
  int ready[2];
  int release[2];
  ASSERT_EQ(::pipe(ready), 0);
  ASSERT_EQ(::pipe(release), 0);
  const pid_t child = ::fork();
  ASSERT_GE(child, 0);
  if (child == 0) {
    WriterLock lock(file);
    char c = 'r';
    (void)!::write(ready[1], &c, 1);
    (void)!::read(release[0], &c, 1);
    ::_exit(0);
  }
  char c = 0;
  ASSERT_EQ(::read(ready[0], &c, 1), 1);
  EXPECT_EQ(code_of([&] { append_records(file, synthetic(1, 1)); }), ErrorCode::LockHeld);
  (void)!::write(release[1], &c, 1);
  int status = 0;
  ::waitpid(child, &status, 0);
  EXPECT_NO_THROW(append_records(file, synthetic(1, 1)));
  for (int fd : {ready[0], ready[1], release[0], release[1]}) ::close(fd);
}

TEST(Datastore, JsonDocuments) {
  TempDir dir;
  write_json_atomic(dir / "sub" / "m.json", nlohmann::json{{"b", 1}, {"a", "x"}});
  EXPECT_EQ(testing::slurp(dir / "sub" / "m.json"), "{\n  \"a\": \"x\",\n  \"b\": 1\n}\n");
  EXPECT_EQ(read_json(dir / "sub" / "m.json")["b"], 1);
  testing::write_text(dir / "bad.json", "{");
  EXPECT_EQ(code_of([&] { read_json(dir / "bad.json"); }), ErrorCode::SchemaError);
}

TEST(Datastore, TrajectoryAndCandidateStores) {
  TempDir dir;
  Trajectory t;
  t.id = "t1-0123456789ab";
  t.task = testing::demo_tasks()[0];
  t.steps.push_back(TrajectoryStep{Observation{"WebShop", PageKind::Search, 0}, std::nullopt, actions::search("x")});
  t.final_reward = 1.0;
  t.agent_backend = "agent";
  t.domain_info = "shopping";
  append_trajectories(dir / "t.jsonl", std::vector<Trajectory>{t});
  EXPECT_EQ(load_trajectories(dir / "t.jsonl"), std::vector<Trajectory>{t});

  CandidateRecord c;
  c.step_ref = {t.id, 0};
  c.candidate = parse_contextualization("focus");
  c.per_agent_scores = {1};
  c.reward = 1;
  c.verdicts = {{"search[x]", "", false}};
  append_candidates(dir / "c.jsonl", std::vector<CandidateRecord>{c});
  const auto back = load_candidates(dir / "c.jsonl");
  ASSERT_EQ(back.size(), 1u);
  EXPECT_EQ(nlohmann::json(back[0]), nlohmann::json(c));
}

}  // namespace
}  // namespace lensloop
