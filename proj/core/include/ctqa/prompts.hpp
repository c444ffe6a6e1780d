#pragma once

#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <string>
#include <string_view>
#include <vector>

#include "ctqa/tokenizer.hpp"

namespace ctqa {

enum class TemplateId { SingleTurn, MultiTurn1, MultiTurn2, MultiTurn3, Simple };

/// Stable template names used in configuration and reports.
std::string_view template_name(TemplateId id);

struct PromptTemplate {
    TemplateId id = TemplateId::SingleTurn;
    std::string body;                    // byte-identical to the shipped asset
    std::vector<std::string> slot_keys;  // normalized binding keys

    std::string sha256() const;
};

struct FilledPrompt {
    TemplateId template_id = TemplateId::SingleTurn;
    std::string text;
    int token_count = 0;
};

struct TokenBudget {
    int context_limit = 4097;
    int generation_reserve = 512;
};

enum class Route { Single, Multi };

using SlotBindings = std::map<std::string, std::string>;

/// Holds the prompt templates, fills slots, counts tokens, and routes
/// between the single-turn and multi-turn schemes.
///
/// Slot markers appear in template bodies as bracketed names, e.g.
/// "Title: [TABLE_TITLE_HERE]". Filling replaces the marker name and keeps
/// the surrounding brackets, so the filled text reads "Title: [tab-102]".
class PromptEngine {
public:
    /// Templates from the embedded copies of the shipped assets.
    explicit PromptEngine(std::shared_ptr<TokenCounter> counter = nullptr);

    /// Templates read from asset files (same filenames as shipped).
    static PromptEngine from_directory(const std::filesystem::path& dir,
                                       std::shared_ptr<TokenCounter> counter = nullptr);

    const PromptTemplate& get(TemplateId id) const;

    /// Substitutes bindings into the template. Bindings must cover the
    /// template's slots exactly; values containing a slot marker are
    /// rejected. Throws MissingSlotError / ExtraSlotError / PromptError.
    FilledPrompt fill(TemplateId id, const SlotBindings& bindings) const;

    int count_tokens(std::string_view text) const { return counter_->count(text); }
    const TokenCounter& counter() const { return *counter_; }

    /// Single iff the prompt plus the generation reserve fits the context
    /// limit; Multi otherwise. Monotone in token count.
    static Route route(const FilledPrompt& filled_single_turn, const TokenBudget& budget);

private:
    std::vector<PromptTemplate> templates_;
    std::shared_ptr<TokenCounter> counter_;

    void load_bodies(const std::function<std::string(std::string_view)>& read_asset);
};

}  // namespace ctqa
