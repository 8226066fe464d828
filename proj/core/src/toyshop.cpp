#include "lensloop/toyshop.hpp"

#include <algorithm>
#include <set>

#include "lensloop/error.hpp"
#include "text_util.hpp"

namespace lensloop {

namespace {

constexpr std::string_view kBackToSearch = "Back to Search";
constexpr std::string_view kNext = "Next >";
constexpr std::string_view kPrev = "< Prev";
constexpr std::string_view kBuyNow = "Buy Now";

std::string button(std::string_view label) { return "[ " + std::string(label) + " ]"; }

bool same_label(std::string_view a, std::string_view b) { return text::lower(text::trim(a)) == text::lower(b); }

}  // namespace

std::string_view to_string(PageKind kind) noexcept {
  switch (kind) {
    case PageKind::Search: return "Search";
    case PageKind::Results: return "Results";
    case PageKind::Item: return "Item";
    case PageKind::Confirmation: return "Confirmation";
    case PageKind::External: return "External";
  }
  return "External";
}

std::optional<PageKind> page_kind_from_string(std::string_view name) noexcept {
  for (const PageKind k :
       {PageKind::Search, PageKind::Results, PageKind::Item, PageKind::Confirmation, PageKind::External}) {
    if (to_string(k) == name) return k;
  }
  return std::nullopt;
}

double grade(const CatalogItem& purchased, const std::map<std::string, std::string>& chosen_options,
             const GoalSpec& goal) {
  int matched = 0;
  for (const auto& attr : goal.attributes) {
    if (purchased.attributes.count(attr)) ++matched;
  }
  for (const auto& [name, value] : goal.options) {
    const auto it = chosen_options.find(name);
    if (it != chosen_options.end() && it->second == value) ++matched;
  }
  if (purchased.price <= goal.price_budget) ++matched;
  const auto denominator = static_cast<double>(goal.attributes.size() + goal.options.size() + 1);
  return static_cast<double>(matched) / denominator;
}

Catalog::Catalog(std::vector<CatalogItem> items) : items_(std::move(items)) {
  std::sort(items_.begin(), items_.end(), [](const auto& a, const auto& b) { return a.id < b.id; });
  for (std::size_t i = 1; i < items_.size(); ++i) {
    if (items_[i].id == items_[i - 1].id) throw Error(ErrorCode::SchemaError, "duplicate catalog id " + items_[i].id);
  }
}

const CatalogItem* Catalog::find(std::string_view id) const {
  const auto it = std::lower_bound(items_.begin(), items_.end(), id,
                                   [](const CatalogItem& item, std::string_view key) { return item.id < key; });
  return it != items_.end() && it->id == id ? &*it : nullptr;
}

int Catalog::overlap(std::string_view query, const CatalogItem& item) {
  std::set<std::string> haystack;
  for (auto& tok : text::split_ws(text::lower(item.title))) haystack.insert(std::move(tok));
  for (const auto& attr : item.attributes) {
    for (auto& tok : text::split_ws(text::lower(attr))) haystack.insert(std::move(tok));
  }
  std::set<std::string> needles;
  for (auto& tok : text::split_ws(text::lower(query))) needles.insert(std::move(tok));
  int count = 0;
  for (const auto& tok : needles) {
    if (haystack.count(tok)) ++count;
  }
  return count;
}

std::vector<const CatalogItem*> Catalog::search(std::string_view query) const {
  std::vector<std::pair<int, const CatalogItem*>> scored;
  for (const auto& item : items_) {
    const int score = overlap(query, item);
    if (score > 0) scored.emplace_back(score, &item);
  }
  // items_ is id-sorted, so a stable sort on score keeps ascending ids within ties.
  std::stable_sort(scored.begin(), scored.end(), [](const auto& a, const auto& b) { return a.first > b.first; });
  std::vector<const CatalogItem*> out;
  out.reserve(scored.size());
  for (const auto& [score, item] : scored) out.push_back(item);
  return out;
}

ToyShop::ToyShop(std::shared_ptr<const Catalog> catalog, ToyShopOptions options)
    : catalog_(std::move(catalog)), options_(options) {
  if (!catalog_) throw Error(ErrorCode::ConfigError, "ToyShop needs a catalog");
  if (options_.max_steps < 1 || options_.page_size < 1) throw Error(ErrorCode::ConfigError, "invalid ToyShop options");
}

Observation ToyShop::reset(const Task& task) {
  if (task.binding.kind != EnvBinding::Kind::ToyShop || !task.goal) {
    throw Error(ErrorCode::UnknownTask, "task " + task.id + " is not a ToyShop task");
  }
  task_ = task;
  state_ = State{};
  steps_ = 0;
  open_ = true;
  return Observation{render(state_), PageKind::Search, 0};
}

std::string ToyShop::render(const State& state) const {
  std::string out;
  const auto line = [&](std::string_view s) {
    out += s;
    out += '\n';
  };
  switch (state.page) {
    case PageKind::Search:
      line("WebShop");
      line("Instruction:");
      line(task_.instruction);
      line(button("Search"));
      break;
    case PageKind::Results: {
      const auto hits = catalog_->search(state.query);
      const auto total = static_cast<int>(hits.size());
      line(button(kBackToSearch));
      line("Page " + std::to_string(state.results_page) + " (Total results: " + std::to_string(total) + ")");
      if (state.results_page > 1) line(button(kPrev));
      if (state.results_page * options_.page_size < total) line(button(kNext));
      const int begin = (state.results_page - 1) * options_.page_size;
      for (int i = begin; i < std::min(total, begin + options_.page_size); ++i) {
        line(button(hits[static_cast<std::size_t>(i)]->id));
        line(hits[static_cast<std::size_t>(i)]->title);
        line(hits[static_cast<std::size_t>(i)]->price.str());
      }
      break;
    }
    case PageKind::Item: {
      const CatalogItem& item = *state.item;
      for (const auto& group : item.options) {
        const auto it = state.chosen.find(group.name);
        if (it != state.chosen.end()) line("You have clicked " + it->second + ".");
      }
      line(button(kBackToSearch));
      line(button(kPrev));
      for (const auto& group : item.options) {
        line(group.name);
        for (const auto& value : group.values) line(button(value));
      }
      line(item.title);
      line("Price: " + item.price.str());
      line("Rating: N.A.");
      line(button(kBuyNow));
      break;
    }
    case PageKind::Confirmation:
      line("Thank you for shopping with us!");
      line("Purchased: " + state.item->id);
      break;
    case PageKind::External:
      break;
  }
  if (!out.empty()) out.pop_back();
  return out;
}

bool ToyShop::apply(const Action& action, double& reward, bool& done) {
  State& s = state_;
  if (action.kind == ActionKind::Search) {
    if (s.page != PageKind::Search) return false;
    s.query = action.text("query");
    s.results_page = 1;
    s.page = PageKind::Results;
    return true;
  }

  const std::string& target = action.text("target");
  if (same_label(target, kBackToSearch) && (s.page == PageKind::Results || s.page == PageKind::Item)) {
    s = State{};
    return true;
  }

  if (s.page == PageKind::Results) {
    const auto total = static_cast<int>(catalog_->search(s.query).size());
    if (same_label(target, kNext) && s.results_page * options_.page_size < total) {
      ++s.results_page;
      return true;
    }
    if (same_label(target, kPrev) && s.results_page > 1) {
      --s.results_page;
      return true;
    }
    const auto hits = catalog_->search(s.query);
    const int begin = (s.results_page - 1) * options_.page_size;
    for (int i = begin; i < std::min(total, begin + options_.page_size); ++i) {
      const CatalogItem* item = hits[static_cast<std::size_t>(i)];
      if (same_label(target, item->id)) {
        s.item = item;
        s.chosen.clear();
        s.page = PageKind::Item;
        return true;
      }
    }
    return false;
  }

  if (s.page == PageKind::Item) {
    if (same_label(target, kPrev)) {
      s.item = nullptr;
      s.chosen.clear();
      s.page = PageKind::Results;
      return true;
    }
    if (same_label(target, kBuyNow)) {
      reward = grade(*s.item, s.chosen, *task_.goal);
      done = true;
      s.page = PageKind::Confirmation;
      return true;
    }
    for (const auto& group : s.item->options) {
      for (const auto& value : group.values) {
        if (same_label(target, value)) {
          s.chosen[group.name] = value;
          return true;
        }
      }
    }
  }
  return false;
}

StepOutcome ToyShop::step(const Action& action) {
  if (!open_) throw Error(ErrorCode::EpisodeClosed, "no open episode");
  if (dialect_of(action.kind) != ActionDialect::Shop) {
    throw Error(ErrorCode::DialectMismatch, std::string(verb(action.kind)) + "(...) is not a shop action");
  }
  const Action norm = normalize(action);
  ++steps_;
  double reward = 0.0;
  bool done = false;
  const bool admissible = apply(norm, reward, done);

  std::string text = render(state_);
  if (!admissible) text = "Invalid action: " + render_action(norm) + " had no effect.\n" + text;
  if (!done && steps_ >= options_.max_steps) {
    done = true;
    reward = 0.0;
  }
  if (done) open_ = false;
  return StepOutcome{Observation{std::move(text), state_.page, steps_}, reward, done};
}

}  // namespace lensloop
