#include <gtest/gtest.h>

#include "lensloop/context_source.hpp"
#include "lensloop/datastore.hpp"
#include "lensloop/error.hpp"
#include "lensloop/flywheel.hpp"
#include "lensloop/trainer.hpp"
#include "test_support.hpp"

namespace lensloop {
namespace {

namespace fs = std::filesystem;
using testing::TempDir;

std::vector<SftRecord> records() {
  return {SftRecord{"g", "None", "page one", "<reasoning>r1</reasoning><extraction>first</extraction>", 3, false,
                    {"t1-a", 0}},
          SftRecord{"g", "None", "page two", "Reasoning: r2\nRefined observation: second", 2, true, {"t1-a", 1}},
          SftRecord{"g", "None", "page one", "<extraction>shadowed</extraction>", 1, false, {"t2-b", 0}}};
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

CtxRequest on(std::string observation) {
  return CtxRequest{"g", "None", std::move(observation), std::nullopt, "shopping"};
}

TEST(ExemplarTrainer, WritesStoreAndServesTargets) {
  TempDir dir;
  const auto recs = records();
  const TrainerHandle handle = trainer_fit(recs, TrainerSpec{TrainerKind::Exemplar, dir / "out"});
  EXPECT_EQ(handle.kind, TrainerKind::Exemplar);
  EXPECT_EQ(load_records(handle.artifact_ref), recs);

  Gateway gw(testing::quiet_gateway());
  gw.register_backend("ctx", testing::scripted({testing::always("<extraction>fallback</extraction>")}));
  const auto source = context_from_handle(handle, gw, std::make_shared<ModelContextSource>(gw, "ctx"));
  EXPECT_EQ(source->describe(), "exemplar:" + handle.artifact_ref);

  auto hit = source->sample(on("page one"), 3, 0.7);
  ASSERT_EQ(hit.size(), 1u);
  EXPECT_EQ(hit[0].observation.extraction, "first");
  EXPECT_EQ(hit[0].multiplicity, 3);
  EXPECT_EQ(hit[0].observation.source.kind, CtxSourceKind::Exemplar);
  EXPECT_EQ(source->sample(on("page two"), 1, 0)[0].observation.extraction, "second");
  EXPECT_TRUE(gw.transcript().empty());

  EXPECT_EQ(source->sample(on("unseen"), 1, 0)[0].observation.extraction, "fallback");
  CtxRequest hinted = on("page one");
  hinted.hint_action = actions::search("x");
  EXPECT_EQ(source->sample(hinted, 1, 0)[0].observation.extraction, "fallback");
  EXPECT_EQ(gw.transcript().size(), 2u);

  // Refitting replaces the store.
  trainer_fit(std::span(recs).first(1), TrainerSpec{TrainerKind::Exemplar, dir / "out"});
  EXPECT_EQ(load_records(handle.artifact_ref).size(), 1u);
}

TEST(ExemplarSource, NoFallback) {
  const auto recs = records();
  ExemplarContextSource source(recs, nullptr);
  EXPECT_EQ(source.size(), 2u);
  EXPECT_EQ(code_of([&] { source.sample(on("unseen"), 1, 0); }), ErrorCode::AllUnparsable);
  EXPECT_EQ(code_of([&] { source.sample(on("page one"), 0, 0); }), ErrorCode::ConfigError);
}

TEST(Trainer, Errors) {
  TempDir dir;
  EXPECT_EQ(code_of([&] { trainer_fit({}, TrainerSpec{TrainerKind::Exemplar, dir / "o"}); }), ErrorCode::EmptyDataset);
  const auto recs = records();
  EXPECT_EQ(code_of([&] { trainer_fit(recs, TrainerSpec{TrainerKind::ExternalSft, dir / "o"}); }),
            ErrorCode::AdapterUnavailable);
  TrainerSpec unreachable{TrainerKind::ExternalSft, dir / "o", "http://127.0.0.1:1/train", "", 2};
  EXPECT_EQ(code_of([&] { trainer_fit(recs, unreachable); }), ErrorCode::AdapterUnavailable);
}

TEST(ExternalSftTrainer, Endpoint) {
  TempDir dir;
  nlohmann::json seen;
  testing::StubServer server([&](const httplib::Request& req, httplib::Response& res) {
    if (req.path == "/train") {
      seen = nlohmann::json::parse(req.body);
      res.set_content(R"({"backend_id":"ctx-ft-1","url":"http://127.0.0.1:9/v1"})", "application/json");
    } else {
      res.status = 500;
    }
  });
  const auto recs = records();
  const TrainerHandle handle =
      trainer_fit(recs, TrainerSpec{TrainerKind::ExternalSft, dir / "sft", server.url("/train"), "", 10});
  EXPECT_EQ(handle, (TrainerHandle{TrainerKind::ExternalSft, "ctx-ft-1", "http://127.0.0.1:9/v1"}));
  EXPECT_EQ(seen["output_dir"], fs::absolute(dir / "sft").string());
  EXPECT_EQ(load_records(seen["dataset_path"].get<std::string>()), recs);

  testing::StubServer rude([](const httplib::Request&, httplib::Response& res) {
    res.set_content(R"({"ok":true})", "application/json");
  });
  EXPECT_EQ(code_of([&] { trainer_fit(recs, TrainerSpec{TrainerKind::ExternalSft, dir / "x", rude.url(), "", 5}); }),
            ErrorCode::AdapterUnavailable);
}

TEST(ExternalSftTrainer, CommandStub) {
  TempDir dir;
  const fs::path script = dir / "adapter.sh";
  testing::write_text(script,
                      "#!/bin/sh\n"
                      "[ \"$1\" = train ] && [ \"$2\" = --config ] || exit 3\n"
                      "echo \"training with $3\"\n"
                      "grep -q dataset_path \"$3\" || exit 4\n"
                      "echo '{\"backend_id\":\"ctx-cmd\",\"url\":\"http://localhost:1/v1\"}'\n"
                      "echo\n");
  fs::permissions(script, fs::perms::owner_all);
  const auto recs = records();
  const TrainerHandle handle =
      trainer_fit(recs, TrainerSpec{TrainerKind::ExternalSft, dir / "it's out", "", script.string(), 10});
  EXPECT_EQ(handle.artifact_ref, "ctx-cmd");
  EXPECT_EQ(handle.endpoint, "http://localhost:1/v1");
  const auto config = read_json(dir / "it's out" / "sft.json");
  EXPECT_EQ(load_records(config["dataset_path"].get<std::string>()), recs);

  EXPECT_EQ(code_of([&] { trainer_fit(recs, TrainerSpec{TrainerKind::ExternalSft, dir / "f", "", "false", 10}); }),
            ErrorCode::AdapterUnavailable);
  EXPECT_EQ(code_of([&] { trainer_fit(recs, TrainerSpec{TrainerKind::ExternalSft, dir / "f", "", "true", 10}); }),
            ErrorCode::AdapterUnavailable);
}

TEST(ExternalSftTrainer, HandleRegistersRemoteBackend) {
  testing::StubServer model([](const httplib::Request& req, httplib::Response& res) {
    EXPECT_EQ(nlohmann::json::parse(req.body)["model"], "ctx-ft-2");
    res.set_content(testing::chat_reply("<extraction>tuned</extraction>"), "application/json");
  });
  Gateway gw(testing::quiet_gateway());
  const auto source =
      context_from_handle(TrainerHandle{TrainerKind::ExternalSft, "ctx-ft-2", model.url("/v1")}, gw, nullptr);
  EXPECT_TRUE(gw.has_backend("ctx-ft-2"));
  EXPECT_EQ(source->describe(), "model:ctx-ft-2");
  EXPECT_EQ(source->sample(on("p"), 2, 0.7)[0].observation.extraction, "tuned");
  EXPECT_EQ(code_of([&] { context_from_handle(TrainerHandle{TrainerKind::ExternalSft, "nowhere", ""}, gw, nullptr); }),
            ErrorCode::BackendUnknown);
}

TEST(TrainerHandleJson, RoundTrip) {
  const TrainerHandle h{TrainerKind::ExternalSft, "id", "http://x/v1"};
  EXPECT_EQ(nlohmann::json(h).get<TrainerHandle>(), h);
  EXPECT_THROW((nlohmann::json{{"kind", "magic"}, {"artifact_ref", "x"}}.get<TrainerHandle>()), Error);
}

}  // namespace
}  // namespace lensloop
