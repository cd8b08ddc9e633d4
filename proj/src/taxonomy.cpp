#include "checkguard/taxonomy.hpp"

#include "checkguard/io.hpp"

#include <set>

namespace checkguard::taxonomy {

namespace {

template <class E>
E field(const nlohmann::json& rec, const char* name, std::size_t line)
{
    if (!rec.contains(name) || !rec.at(name).is_string())
        throw io::RecordParseError(std::string("missing field '") + name + "'", line);
    auto s = rec.at(name).get<std::string>();
    auto v = parse_enum<E>(s);
    if (!v)
        throw UnknownCategory(line, name, s);
    return *v;
}

template <class E>
std::map<std::string, std::size_t> count_facet(std::span<const LabeledBug> bugs, E TaxonomyLabel::*member)
{
    std::map<std::string, std::size_t> out;
    for (auto v : all_values<E>())
        out[std::string(to_string(v))] = 0;
    for (const auto& b : bugs)
        ++out[std::string(to_string(b.label.*member))];
    return out;
}

RuleExample example_from_json(const nlohmann::json& j)
{
    RuleExample ex;
    ex.message = j.value("message", std::string{});
    auto changes = diff::parse_diff(j.at("diff").get<std::string>());
    if (changes.empty())
        throw std::invalid_argument("rule-set example without a file change");
    ex.change = std::move(changes.front());
    return ex;
}

nlohmann::json example_to_json(const RuleExample& ex)
{
    return {{"message", ex.message}, {"diff", to_unified_diff(ex.change)}};
}

} // namespace

bool is_consistent(const TaxonomyLabel& label)
{
    return label.violation != Violation::Misleading || label.element == Element::ErrorMessage;
}

std::string to_unified_diff(const diff::CodeChange& change)
{
    const auto& p = change.file_path;
    std::string out = "diff --git a/" + p + " b/" + p + "\n";
    if (change.binary)
        return out + "Binary files a/" + p + " and b/" + p + " differ\n";
    out += "--- a/" + p + "\n+++ b/" + p + "\n";
    for (const auto& h : change.hunks)
        out += diff::serialize_hunk(h);
    return out;
}

std::vector<LabeledBug> load_dataset(const std::filesystem::path& path)
{
    std::vector<LabeledBug> out;
    std::set<std::string> seen;
    for (const auto& [line, rec] : io::read_jsonl(path)) {
        if (!rec.is_object())
            throw io::RecordParseError("record is not an object", line);
        LabeledBug b;
        if (!rec.contains("sha") || !rec.at("sha").is_string() || rec.at("sha").get<std::string>().empty())
            throw io::RecordParseError("missing field 'sha'", line);
        b.commit_sha = rec.at("sha").get<std::string>();
        b.repo = rec.value("repo", std::string{});
        b.label.violation = field<Violation>(rec, "violation", line);
        b.label.element = field<Element>(rec, "element", line);
        b.label.symptom = field<Symptom>(rec, "symptom", line);
        b.label.action = field<Action>(rec, "action", line);
        b.label.condition = field<Condition>(rec, "condition", line);
        b.label.fix_element = field<FixElement>(rec, "fix_element", line);
        if (!is_consistent(b.label))
            throw UnknownCategory(line, "violation", "Misleading (element must be ErrorMessage)");
        b.message = rec.value("message", std::string{});
        try {
            auto changes = diff::parse_diff(rec.value("diff", std::string{}));
            if (!changes.empty())
                b.change = std::move(changes.front());
        } catch (const diff::MalformedDiff& e) {
            throw io::RecordParseError(e.what(), line);
        }
        if (!seen.insert(b.commit_sha).second)
            throw io::RecordParseError("duplicate sha " + b.commit_sha, line);
        out.push_back(std::move(b));
    }
    return out;
}

nlohmann::json to_record(const LabeledBug& b)
{
    return {{"sha", b.commit_sha},
            {"repo", b.repo},
            {"violation", to_string(b.label.violation)},
            {"element", to_string(b.label.element)},
            {"symptom", to_string(b.label.symptom)},
            {"action", to_string(b.label.action)},
            {"condition", to_string(b.label.condition)},
            {"fix_element", to_string(b.label.fix_element)},
            {"message", b.message},
            {"diff", b.change.file_path.empty() ? std::string{} : to_unified_diff(b.change)}};
}

void write_dataset(const std::filesystem::path& path, const std::vector<LabeledBug>& bugs)
{
    std::vector<nlohmann::json> recs;
    recs.reserve(bugs.size());
    for (const auto& b : bugs)
        recs.push_back(to_record(b));
    io::write_file_atomic(path, io::dump_jsonl(recs));
}

Facet parse_facet(std::string_view name)
{
    if (name == "violation")
        return Facet::Violation;
    if (name == "element")
        return Facet::Element;
    if (name == "symptom")
        return Facet::Symptom;
    if (name == "action")
        return Facet::Action;
    if (name == "condition")
        return Facet::Condition;
    if (name == "fix_element")
        return Facet::FixElement;
    throw UnknownFacet("unknown facet '" + std::string(name) + "'");
}

std::map<std::string, std::size_t> marginals(std::span<const LabeledBug> bugs, Facet facet)
{
    switch (facet) {
    case Facet::Violation:
        return count_facet(bugs, &TaxonomyLabel::violation);
    case Facet::Element:
        return count_facet(bugs, &TaxonomyLabel::element);
    case Facet::Symptom:
        return count_facet(bugs, &TaxonomyLabel::symptom);
    case Facet::Action:
        return count_facet(bugs, &TaxonomyLabel::action);
    case Facet::Condition:
        return count_facet(bugs, &TaxonomyLabel::condition);
    case Facet::FixElement:
        break;
    }
    return count_facet(bugs, &TaxonomyLabel::fix_element);
}

std::map<std::string, std::size_t> marginals(std::span<const LabeledBug> bugs, std::string_view facet)
{
    return marginals(bugs, parse_facet(facet));
}

void RuleSet::add(Element key, RuleExample example)
{
    entries_[key].push_back(std::move(example));
}

const std::vector<RuleExample>* RuleSet::find(Element key) const
{
    auto it = entries_.find(key);
    if (it == entries_.end() || it->second.empty())
        return nullptr;
    return &it->second;
}

RuleSet RuleSet::from_json(const nlohmann::json& doc)
{
    if (!doc.is_object())
        throw std::invalid_argument("rule set must be an object keyed by element");
    RuleSet rs;
    for (const auto& [key, list] : doc.items()) {
        if (!list.is_array())
            throw std::invalid_argument("rule set entry '" + key + "' is not a list");
        if (key == "fallback") {
            std::vector<RuleExample> fb;
            for (const auto& j : list)
                fb.push_back(example_from_json(j));
            rs.set_fallback(std::move(fb));
            continue;
        }
        auto element = parse_enum<Element>(key);
        if (!element)
            throw UnknownElementKey("unknown element key '" + key + "' in rule set");
        if (list.empty())
            throw std::invalid_argument("rule set entry '" + key + "' has no examples");
        for (const auto& j : list)
            rs.add(*element, example_from_json(j));
    }
    return rs;
}

RuleSet RuleSet::load(const std::filesystem::path& path)
{
    nlohmann::json doc;
    try {
        doc = nlohmann::json::parse(io::read_file(path));
    } catch (const nlohmann::json::parse_error& e) {
        throw std::invalid_argument(path.string() + ": " + e.what());
    }
    return from_json(doc);
}

nlohmann::json RuleSet::to_json() const
{
    nlohmann::json doc = nlohmann::json::object();
    for (const auto& [key, list] : entries_) {
        auto arr = nlohmann::json::array();
        for (const auto& ex : list)
            arr.push_back(example_to_json(ex));
        doc[std::string(taxonomy::to_string(key))] = std::move(arr);
    }
    if (!fallback_.empty()) {
        auto arr = nlohmann::json::array();
        for (const auto& ex : fallback_)
            arr.push_back(example_to_json(ex));
        doc["fallback"] = std::move(arr);
    }
    return doc;
}

RuleSet build_ruleset(std::span<const LabeledBug> bugs, std::size_t per_element)
{
    RuleSet rs;
    std::map<Element, std::size_t> taken;
    for (const auto& b : bugs) {
        if (b.label.element == Element::Others || b.change.file_path.empty())
            continue;
        if (taken[b.label.element] >= per_element)
            continue;
        ++taken[b.label.element];
        rs.add(b.label.element, {b.message, b.change});
    }
    rs.set_fallback(default_fallback_examples());
    return rs;
}

FewShotSelection select_fewshot_examples(const RuleSet& ruleset, Element key, std::size_t k)
{
    if (k < 1)
        throw std::invalid_argument("select_fewshot_examples: k must be >= 1");
    FewShotSelection sel;
    const auto* list = key == Element::Others ? nullptr : ruleset.find(key);
    if (!list) {
        if (ruleset.fallback().empty())
            throw UnknownElementKey("no rule-set examples for '" + std::string(to_string(key))
                                    + "' and no fallback configured");
        sel.used_fallback = true;
        list = &ruleset.fallback();
    }
    auto n = std::min(k, list->size());
    sel.examples.assign(list->begin(), list->begin() + static_cast<std::ptrdiff_t>(n));
    return sel;
}

std::vector<RuleExample> default_fallback_examples()
{
    diff::Hunk h1;
    h1.old_start = 89;
    h1.old_len = 1;
    h1.new_start = 89;
    h1.new_len = 2;
    h1.header = "@@ -89,1 +89,2 @@";
    h1.lines = {{diff::LineTag::Removed, "  TORCH_CHECK((unsigned)l < dims.size());"},
                {diff::LineTag::Added, "  TORCH_CHECK((unsigned)l < dims.size() &&"},
                {diff::LineTag::Added, "              (unsigned)k < dims.size());"}};

    diff::Hunk h2;
    h2.old_start = 40;
    h2.old_len = 1;
    h2.new_start = 40;
    h2.new_len = 3;
    h2.header = "@@ -40,1 +40,3 @@";
    h2.lines = {{diff::LineTag::Context, "    int num_slices = 1;"},
                {diff::LineTag::Added, "    OP_REQUIRES(ctx, axis_ < input.dims(),"},
                {diff::LineTag::Added, "                errors::InvalidArgument(\"Axis must be less than input dimension.\"));"}};

    return {
        {"Check both dimension indices in size_between_dim_",
         diff::make_change("c10/core/TensorImpl.h", {h1})},
        {"Validate axis against input rank before slicing",
         diff::make_change("tensorflow/core/kernels/quantize_op.cc", {h2})},
    };
}

} // namespace checkguard::taxonomy
