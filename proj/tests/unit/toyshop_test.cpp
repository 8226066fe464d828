#include <gtest/gtest.h>

#include <algorithm>
#include <cctype>
#include <random>
#include <set>
#include <sstream>

#include "lensloop/error.hpp"
#include "lensloop/toyshop.hpp"
#include "test_support.hpp"

namespace lensloop {
namespace {

using testing::demo_catalog;
using testing::demo_tasks;

std::set<std::string> words(const std::string& s) {
  std::string lowered;
  for (const char c : s) lowered.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
  std::istringstream in(lowered);
  std::set<std::string> out;
  for (std::string w; in >> w;) out.insert(w);
  return out;
}

// Independent ranking: score every item, drop zero scores, sort by
// (score desc, id asc).
std::vector<std::string> oracle_search(const std::vector<CatalogItem>& items, const std::string& query) {
  const auto q = words(query);
  std::vector<std::pair<int, std::string>> scored;
  for (const auto& item : items) {
    auto hay = words(item.title);
    for (const auto& a : item.attributes) {
      for (const auto& w : words(a)) hay.insert(w);
    }
    int score = 0;
    for (const auto& w : q) score += hay.count(w) ? 1 : 0;
    if (score > 0) scored.emplace_back(-score, item.id);
  }
  std::sort(scored.begin(), scored.end());
  std::vector<std::string> out;
  for (const auto& s : scored) out.push_back(s.second);
  return out;
}

TEST(Grade, ExhaustiveGridAgainstFormula) {
  GoalSpec goal;
  goal.attributes = {"handmade", "eco friendly"};
  goal.options = {{"color", "red"}};
  goal.price_budget = Money::from_dollars(20);
  for (int attrs = 0; attrs <= 2; ++attrs) {
    for (int opts = 0; opts <= 1; ++opts) {
      for (int price_ok = 0; price_ok <= 1; ++price_ok) {
        CatalogItem item;
        item.id = "X";
        item.title = "thing";
        item.price = Money::from_dollars(price_ok ? 19.99 : 20.01);
        if (attrs >= 1) item.attributes.insert("handmade");
        if (attrs >= 2) item.attributes.insert("eco friendly");
        item.attributes.insert("unrelated");
        std::map<std::string, std::string> chosen{{"size", "large"}};
        chosen["color"] = opts ? "red" : "blue";
        const double expected = (attrs + opts + price_ok) / 4.0;
        EXPECT_DOUBLE_EQ(grade(item, chosen, goal), expected) << attrs << opts << price_ok;
        EXPECT_EQ(grade(item, chosen, goal) == 1.0, attrs == 2 && opts == 1 && price_ok == 1);
      }
    }
  }
}

TEST(Grade, PriceAtBudgetCounts) {
  CatalogItem item{"X", "t", Money::from_dollars(10), {}, {}};
  GoalSpec goal{{}, {}, Money::from_dollars(10)};
  EXPECT_DOUBLE_EQ(grade(item, {}, goal), 1.0);
}

TEST(CatalogSearch, MatchesBruteForceOracle) {
  const auto catalog = demo_catalog();
  std::vector<std::string> vocab;
  for (const auto& item : catalog->items()) {
    for (const auto& w : words(item.title)) vocab.push_back(w);
  }
  vocab.push_back("nonexistent");
  std::mt19937 rng(99);
  for (int trial = 0; trial < 300; ++trial) {
    std::string query;
    const int n = std::uniform_int_distribution<int>(1, 4)(rng);
    for (int i = 0; i < n; ++i) {
      std::string w = vocab[std::uniform_int_distribution<std::size_t>(0, vocab.size() - 1)(rng)];
      if (i % 2) std::transform(w.begin(), w.end(), w.begin(), ::toupper);
      query += (i ? "  " : "") + w;
    }
    std::vector<std::string> got;
    for (const auto* item : catalog->search(query)) got.push_back(item->id);
    ASSERT_EQ(got, oracle_search(catalog->items(), query)) << query;
  }
}

TEST(CatalogSearch, RepeatedTokensCountOnce) {
  const auto catalog = demo_catalog();
  const auto& item = catalog->items().front();
  const auto first_word = *words(item.title).begin();
  EXPECT_EQ(Catalog::overlap(first_word + " " + first_word, item), 1);
}

class ToyShopTest : public ::testing::Test {
 protected:
  std::vector<Task> tasks = demo_tasks();
  ToyShop shop{demo_catalog()};

  const Task& task(const std::string& id) {
    return *std::find_if(tasks.begin(), tasks.end(), [&](const Task& t) { return t.id == id; });
  }
  StepOutcome act(const std::string& text) { return shop.step(parse_action(text, ActionDialect::Shop)); }
};

TEST_F(ToyShopTest, FullPurchaseEarnsOne) {
  const Task& t1 = task("t1");
  const Observation first = shop.reset(t1);
  EXPECT_EQ(first.page_kind, PageKind::Search);
  EXPECT_NE(first.text.find(t1.instruction), std::string::npos);
  EXPECT_NE(first.text.find("[ Search ]"), std::string::npos);

  const auto catalog = demo_catalog();
  std::string query = t1.instruction.substr(9, t1.instruction.find(" that is") - 9);
  const auto results = act("search[" + query + "]");
  EXPECT_EQ(results.observation.page_kind, PageKind::Results);
  EXPECT_NE(results.observation.text.find("Total results"), std::string::npos);

  const std::string id = catalog->search(query).front()->id;
  const auto item = act("click[" + id + "]");
  EXPECT_EQ(item.observation.page_kind, PageKind::Item);
  EXPECT_NE(item.observation.text.find("[ Buy Now ]"), std::string::npos);

  const auto& [name, value] = *t1.goal->options.begin();
  const auto chose = act("click[" + value + "]");
  EXPECT_NE(chose.observation.text.find("You have clicked " + value + "."), std::string::npos);
  const auto bought = act("click[Buy Now]");
  EXPECT_TRUE(bought.done);
  EXPECT_DOUBLE_EQ(bought.reward, 1.0);
  EXPECT_EQ(bought.observation.page_kind, PageKind::Confirmation);
  EXPECT_THROW(act("click[Buy Now]"), Error);
}

TEST_F(ToyShopTest, MissingOptionGivesPartialReward) {
  shop.reset(task("t1"));
  const std::string query = "bamboo candle deluxe";
  act("search[" + query + "]");
  act("click[" + demo_catalog()->search(query).front()->id + "]");
  const auto bought = act("click[Buy Now]");
  EXPECT_TRUE(bought.done);
  EXPECT_DOUBLE_EQ(bought.reward, 2.0 / 3.0);
}

TEST_F(ToyShopTest, InadmissibleActionLeavesPageAndConsumesStep) {
  const Observation first = shop.reset(task("t1"));
  const auto out = act("click[Buy Now]");
  EXPECT_FALSE(out.done);
  EXPECT_EQ(out.observation.step_index, 1);
  EXPECT_EQ(out.observation.text, "Invalid action: click[Buy Now] had no effect.\n" + first.text);
}

TEST_F(ToyShopTest, PagingAndNavigation) {
  shop.reset(task("t1"));
  const auto page1 = act("search[candle mug lamp scarf]");
  EXPECT_NE(page1.observation.text.find("[ Next > ]"), std::string::npos);
  EXPECT_EQ(page1.observation.text.find("[ < Prev ]"), std::string::npos);
  const auto page2 = act("click[Next >]");
  EXPECT_NE(page2.observation.text.find("Page 2"), std::string::npos);
  EXPECT_NE(page2.observation.text.find("[ < Prev ]"), std::string::npos);
  const auto back = act("click[< Prev]");
  EXPECT_EQ(back.observation.text, page1.observation.text);
  const auto home = act("click[back to search]");
  EXPECT_EQ(home.observation.page_kind, PageKind::Search);
}

TEST_F(ToyShopTest, StepLimitEndsWithZero) {
  ToyShop limited(demo_catalog(), ToyShopOptions{3, 10});
  limited.reset(task("t1"));
  const auto noop = parse_action("click[nothing]", ActionDialect::Shop);
  EXPECT_FALSE(limited.step(noop).done);
  EXPECT_FALSE(limited.step(noop).done);
  const auto last = limited.step(noop);
  EXPECT_TRUE(last.done);
  EXPECT_EQ(last.reward, 0.0);
  EXPECT_THROW(limited.step(noop), Error);
}

TEST_F(ToyShopTest, RejectsBrowserActionsAndForeignTasks) {
  shop.reset(task("t1"));
  try {
    shop.step(actions::click("a1"));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::DialectMismatch);
  }
  Task external = task("t1");
  external.binding = EnvBinding{EnvBinding::Kind::External, "http://x", "web"};
  EXPECT_THROW(shop.reset(external), Error);
}

TEST_F(ToyShopTest, ReplayIsByteIdentical) {
  const std::vector<std::string> script = {"search[ceramic mug]", "click[Next >]", "click[< Prev]", "click[B002]",
                                           "click[B999]", "click[Buy Now]"};
  const auto run = [&] {
    ToyShop env(demo_catalog());
    std::string transcript = env.reset(task("t2")).text;
    for (const auto& a : script) {
      const auto out = env.step(parse_action(a, ActionDialect::Shop));
      transcript += "\n--\n" + out.observation.text + "|" + std::to_string(out.reward);
      if (out.done) break;
    }
    return transcript;
  };
  const std::string first = run();
  for (int i = 0; i < 20; ++i) ASSERT_EQ(run(), first);
}

}  // namespace
}  // namespace lensloop
