#pragma once

#include <algorithm>
#include <cstddef>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "promptkit/errors.hpp"

namespace promptkit {

// A prompt template: whitespace-delimited items containing exactly one [X]
// (subject slot) and one [Y] (answer slot). Non-placeholder items are the
// prompt's trigger/content tokens; for induced prompts each of them is a
// single model token.
class PromptTemplate {
 public:
  static constexpr const char* kSubjectSlot = "[X]";
  static constexpr const char* kAnswerSlot = "[Y]";

  PromptTemplate() = default;

  explicit PromptTemplate(std::vector<std::string> items)
      : items_(std::move(items)) {
    validate();
  }

  // Parses "[X] was born in [Y]". A placeholder glued to punctuation
  // ("[Y].") is split into its own item.
  static PromptTemplate parse(const std::string& text) {
    std::vector<std::string> items;
    std::istringstream in(text);
    std::string word;
    while (in >> word) {
      for (const char* slot : {kSubjectSlot, kAnswerSlot}) {
        const auto at = word.find(slot);
        if (at != std::string::npos && word != slot) {
          if (at > 0) items.push_back(word.substr(0, at));
          items.push_back(slot);
          word = word.substr(at + 3);
          break;
        }
      }
      if (!word.empty()) items.push_back(word);
    }
    return PromptTemplate(std::move(items));
  }

  const std::vector<std::string>& items() const { return items_; }

  std::string str() const {
    std::string out;
    for (std::size_t i = 0; i < items_.size(); ++i) {
      if (i) out += ' ';
      out += items_[i];
    }
    return out;
  }

  std::size_t subject_index() const { return find(kSubjectSlot); }
  std::size_t answer_index() const { return find(kAnswerSlot); }

  // Indices of non-placeholder items, in order.
  std::vector<std::size_t> trigger_item_indices() const {
    std::vector<std::size_t> idx;
    for (std::size_t i = 0; i < items_.size(); ++i)
      if (items_[i] != kSubjectSlot && items_[i] != kAnswerSlot)
        idx.push_back(i);
    return idx;
  }

  std::vector<std::string> trigger_items() const {
    std::vector<std::string> out;
    for (std::size_t i : trigger_item_indices()) out.push_back(items_[i]);
    return out;
  }

  std::size_t trigger_count() const { return trigger_item_indices().size(); }

  // Template with the p-th trigger item removed (p indexes triggers, not raw
  // items). Placeholders are never removed.
  PromptTemplate without_trigger(std::size_t p) const {
    const auto idx = trigger_item_indices();
    if (p >= idx.size())
      throw ValidationError("trigger index out of range in without_trigger");
    std::vector<std::string> items;
    for (std::size_t i = 0; i < items_.size(); ++i)
      if (i != idx[p]) items.push_back(items_[i]);
    return PromptTemplate(std::move(items));
  }

  // Template whose trigger items are replaced by `triggers` in order.
  PromptTemplate with_triggers(const std::vector<std::string>& triggers) const {
    const auto idx = trigger_item_indices();
    if (triggers.size() != idx.size())
      throw ValidationError("trigger count mismatch in with_triggers");
    std::vector<std::string> items = items_;
    for (std::size_t p = 0; p < idx.size(); ++p) items[idx[p]] = triggers[p];
    return PromptTemplate(std::move(items));
  }

  friend bool operator==(const PromptTemplate&, const PromptTemplate&) = default;

 private:
  std::size_t find(const char* slot) const {
    const auto it = std::find(items_.begin(), items_.end(), slot);
    return static_cast<std::size_t>(it - items_.begin());
  }

  void validate() const {
    const auto subj = std::count(items_.begin(), items_.end(),
                                 std::string(kSubjectSlot));
    const auto ans = std::count(items_.begin(), items_.end(),
                                std::string(kAnswerSlot));
    if (subj != 1 || ans != 1)
      throw ValidationError("template must contain exactly one [X] and one "
                            "[Y]: \"" + str() + "\"");
  }

  std::vector<std::string> items_;
};

}  // namespace promptkit
