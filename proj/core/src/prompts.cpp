#include "ctqa/prompts.hpp"

#include <algorithm>
#include <fstream>
#include <set>
#include <sstream>
#include <stdexcept>

#include "ctqa/errors.hpp"
#include "ctqa/sha256.hpp"
#include "prompt_assets.hpp"

namespace ctqa {

namespace {

struct SlotSpec {
    const char* key;     // normalized binding key
    const char* marker;  // marker name as it appears in the template body
};

struct TemplateSpec {
    TemplateId id;
    const char* name;        // stable identifier
    const char* asset_name;  // asset file stem
    std::vector<SlotSpec> slots;
};

// The single-turn asset preserves the shipped spelling QUSTION_HERE; the
// binding key is normalized to QUESTION_HERE.
const std::vector<TemplateSpec>& specs() {
    static const std::vector<TemplateSpec> kSpecs = {
        {TemplateId::SingleTurn,
         "SINGLE_TURN",
         "single_turn",
         {{"TABLE_TITLE_HERE", "TABLE_TITLE_HERE"},
          {"TABLE_COLUMN_HEADER_HERE", "TABLE_COLUMN_HEADER_HERE"},
          {"TABLE_ROW_HEADER_HERE", "TABLE_ROW_HEADER_HERE"},
          {"TABLE_NON_HEADER_HERE", "TABLE_NON_HEADER_HERE"},
          {"QUESTION_HERE", "QUSTION_HERE"}}},
        {TemplateId::MultiTurn1, "MULTI_TURN_1", "multi_turn_1",
         {{"QUESTION_HERE", "QUESTION_HERE"}}},
        {TemplateId::MultiTurn2,
         "MULTI_TURN_2",
         "multi_turn_2",
         {{"QUESTION_HERE", "QUESTION_HERE"},
          {"ANSWER_OF_TURN_1", "ANSWER_OF_TURN_1"},
          {"TABLE_TITLE_HERE", "TABLE_TITLE_HERE"},
          {"TABLE_COLUMN_HEADER_HERE", "TABLE_COLUMN_HEADER_HERE"},
          {"TABLE_ROW_HEADER_HERE", "TABLE_ROW_HEADER_HERE"}}},
        {TemplateId::MultiTurn3,
         "MULTI_TURN_3",
         "multi_turn_3",
         {{"ANSWER_OF_TURN_2", "ANSWER_OF_TURN_2"},
          {"OUTPUT_OF_CODE", "OUTPUT_OF_CODE"},
          {"TABLE_COLUMN_HEADER_HERE", "TABLE_COLUMN_HEADER_HERE"},
          {"TABLE_ROW_HEADER_HERE", "TABLE_ROW_HEADER_HERE"}}},
        {TemplateId::Simple,
         "SIMPLE",
         "simple",
         {{"ORIGINAL_TABLE", "ORIGINAL_TABLE"}, {"QUESTION_HERE", "QUESTION_HERE"}}},
    };
    return kSpecs;
}

const TemplateSpec& spec_for(TemplateId id) {
    for (const auto& s : specs())
        if (s.id == id) return s;
    throw std::logic_error("unknown template id");
}

// Every marker name any template declares. Binding values containing one
// of these would smuggle an unfilled slot into the output or corrupt a
// later substitution, so fill rejects them.
const std::vector<std::string>& all_marker_names() {
    static const std::vector<std::string> kMarkers = [] {
        std::set<std::string> seen;
        for (const auto& s : specs())
            for (const auto& slot : s.slots) seen.insert(slot.marker);
        return std::vector<std::string>(seen.begin(), seen.end());
    }();
    return kMarkers;
}

size_t replace_all(std::string& text, const std::string& from, const std::string& to) {
    size_t n = 0;
    size_t pos = 0;
    while ((pos = text.find(from, pos)) != std::string::npos) {
        text.replace(pos, from.size(), to);
        pos += to.size();
        ++n;
    }
    return n;
}

}  // namespace

std::string_view template_name(TemplateId id) { return spec_for(id).name; }

std::string PromptTemplate::sha256() const { return sha256_hex(body); }

PromptEngine::PromptEngine(std::shared_ptr<TokenCounter> counter)
    : counter_(counter ? std::move(counter) : make_approx_counter()) {
    load_bodies([](std::string_view asset_name) {
        auto body = detail::embedded_prompt_asset(asset_name);
        if (body.empty())
            throw std::logic_error("embedded prompt asset missing: " + std::string(asset_name));
        return std::string(body);
    });
}

PromptEngine PromptEngine::from_directory(const std::filesystem::path& dir,
                                          std::shared_ptr<TokenCounter> counter) {
    PromptEngine engine(std::move(counter));
    engine.templates_.clear();
    engine.load_bodies([&dir](std::string_view asset_name) {
        auto path = dir / (std::string(asset_name) + ".txt");
        std::ifstream in(path, std::ios::binary);
        if (!in) throw SchemaError("cannot open prompt asset " + path.string());
        std::ostringstream os;
        os << in.rdbuf();
        return os.str();
    });
    return engine;
}

void PromptEngine::load_bodies(const std::function<std::string(std::string_view)>& read_asset) {
    templates_.clear();
    for (const auto& s : specs()) {
        PromptTemplate t;
        t.id = s.id;
        t.body = read_asset(s.asset_name);
        for (const auto& slot : s.slots) {
            t.slot_keys.emplace_back(slot.key);
            if (t.body.find("[" + std::string(slot.marker) + "]") == std::string::npos)
                throw SchemaError(std::string("template ") + s.name +
                                  " is missing declared slot marker " + slot.marker);
        }
        templates_.push_back(std::move(t));
    }
}

const PromptTemplate& PromptEngine::get(TemplateId id) const {
    for (const auto& t : templates_)
        if (t.id == id) return t;
    throw std::logic_error("unknown template id");
}

FilledPrompt PromptEngine::fill(TemplateId id, const SlotBindings& bindings) const {
    const auto& s = spec_for(id);
    const auto& t = get(id);

    for (const auto& slot : s.slots)
        if (!bindings.count(slot.key)) throw MissingSlotError(slot.key);
    for (const auto& [key, value] : bindings) {
        bool known = std::any_of(s.slots.begin(), s.slots.end(),
                                 [&key](const SlotSpec& slot) { return key == slot.key; });
        if (!known) throw ExtraSlotError(key);
        for (const auto& marker : all_marker_names())
            if (value.find(marker) != std::string::npos)
                throw PromptError("binding " + key + " contains the slot marker " + marker);
    }

    // Markers are replaced inside their brackets, so "Title: [TABLE_TITLE_HERE]"
    // becomes "Title: [tab-102]".
    FilledPrompt filled;
    filled.template_id = id;
    filled.text = t.body;
    for (const auto& slot : s.slots)
        replace_all(filled.text, std::string(slot.marker), bindings.at(slot.key));
    for (const auto& slot : s.slots)
        if (filled.text.find(slot.marker) != std::string::npos)
            throw PromptError(std::string("slot marker survived filling: ") + slot.marker);
    filled.token_count = counter_->count(filled.text);
    return filled;
}

Route PromptEngine::route(const FilledPrompt& filled_single_turn, const TokenBudget& budget) {
    if (budget.generation_reserve <= 0 || budget.generation_reserve >= budget.context_limit)
        throw std::invalid_argument("token budget requires 0 < generation_reserve < context_limit");
    return filled_single_turn.token_count + budget.generation_reserve <= budget.context_limit
               ? Route::Single
               : Route::Multi;
}

}  // namespace ctqa
