#include <benchmark/benchmark.h>

#include <memory>
#include <vector>

#include "lensloop/action.hpp"
#include "lensloop/task.hpp"
#include "lensloop/toyshop.hpp"

namespace {

using namespace lensloop;

const std::vector<std::string>& browser_lines() {
  static const std::vector<std::string> lines = {
      "click('a34')",
      "click('b7', button='right', modifiers=['Alt', 'Shift'])",
      "fill('a12', 'example with \"quotes\"')",
      "select_option('48', ['red', 'green', 'blue'])",
      "send_msg_to_user('The requested value is $29')",
      "scroll(-50.2, -100.5)",
  };
  return lines;
}

void BM_ParseBrowser(benchmark::State& state) {
  const auto& lines = browser_lines();
  std::size_t i = 0;
  for (auto _ : state) {
    benchmark::DoNotOptimize(parse_action(lines[i++ % lines.size()], ActionDialect::Browser));
  }
}
BENCHMARK(BM_ParseBrowser);

void BM_RenderBrowser(benchmark::State& state) {
  std::vector<Action> parsed;
  for (const auto& line : browser_lines()) parsed.push_back(parse_action(line, ActionDialect::Browser));
  std::size_t i = 0;
  for (auto _ : state) benchmark::DoNotOptimize(render_action(parsed[i++ % parsed.size()]));
}
BENCHMARK(BM_RenderBrowser);

std::shared_ptr<const Catalog> catalog() {
  static const auto c = std::make_shared<const Catalog>(load_catalog(std::string(LENSLOOP_DEMO_DIR) + "/toyshop_catalog_v1.json"));
  return c;
}

void BM_CatalogSearch(benchmark::State& state) {
  const auto c = catalog();
  for (auto _ : state) benchmark::DoNotOptimize(c->search("ceramic mug travel eco friendly handmade"));
}
BENCHMARK(BM_CatalogSearch);

void BM_ToyShopEpisode(benchmark::State& state) {
  const auto c = catalog();
  const std::vector<Task> tasks = load_tasks(std::string(LENSLOOP_DEMO_DIR) + "/tasks.json");
  const Task& task = tasks.front();
  const std::string query = task.instruction.substr(9, task.instruction.find(" that is") - 9);
  const std::string id = c->search(query).front()->id;
  const std::vector<Action> plan = {actions::search(query), actions::bracket_click(id),
                                    actions::bracket_click(task.goal->options.begin()->second),
                                    actions::bracket_click("Buy Now")};
  for (auto _ : state) {
    ToyShop shop(c);
    benchmark::DoNotOptimize(shop.reset(task));
    for (const auto& a : plan) benchmark::DoNotOptimize(shop.step(a));
  }
}
BENCHMARK(BM_ToyShopEpisode);

}  // namespace

BENCHMARK_MAIN();
