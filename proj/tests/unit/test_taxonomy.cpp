#include "checkguard/io.hpp"
#include "checkguard/taxonomy.hpp"

#include "support.hpp"

#include <doctest.h>

#include <numeric>

using namespace checkguard;
using namespace checkguard::taxonomy;
using testing::TempDir;

namespace {

// Published distributions, transcribed by hand. Row order follows the
// enum declarations; 0 stands for an empty cell.
constexpr std::array<std::array<int, 5>, 13> kElementByViolation{{
    // Missing Improper Insufficient Misleading Unnecessary
    {164, 46, 23, 0, 4}, // EdgeCases
    {37, 16, 9, 0, 2},   // TypeChecking
    {33, 9, 4, 0, 0},    // NullValue
    {22, 8, 3, 0, 0},    // BoundaryValue
    {17, 3, 8, 0, 1},    // DeviceAvailability
    {0, 0, 0, 29, 0},    // ErrorMessage
    {7, 4, 3, 0, 2},     // DeviceType
    {6, 7, 3, 0, 0},     // DeviceVersion
    {7, 3, 0, 0, 2},     // ExecutionMode
    {5, 0, 4, 0, 0},     // ComputationGraph
    {5, 1, 1, 0, 1},     // TensorQuantization
    {5, 1, 1, 0, 0},     // BackendType
    {12, 4, 4, 0, 1},    // Others
}};
constexpr std::array<int, 13> kElementTotals{237, 64, 46, 33, 29, 29, 16, 16, 12, 9, 8, 7, 21};
constexpr std::array<int, 5> kViolationTotals{320, 102, 63, 29, 13};

constexpr std::array<std::array<int, 7>, 7> kConditionByAction{{
    // Add Extend Update Improve Replace Relocate Remove
    {171, 49, 43, 8, 3, 4, 6}, // IfChecker
    {126, 6, 20, 14, 11, 2, 7}, // MacroChecker
    {12, 3, 9, 0, 3, 0, 0},     // TypeCheckingAPI
    {8, 1, 1, 5, 1, 1, 0},      // AssertionStatement
    {2, 1, 2, 0, 1, 0, 0},      // CheckerAPI
    {0, 3, 1, 0, 0, 0, 0},      // BooleanExpression
    {1, 2, 0, 0, 0, 0, 0},      // TernaryOperator
}};
constexpr std::array<int, 7> kConditionTotals{284, 186, 27, 17, 6, 4, 3};
constexpr std::array<int, 7> kActionTotals{320, 65, 76, 27, 19, 7, 13};

// {tensorflow, pytorch}
constexpr std::array<std::array<int, 2>, 6> kSymptomByLibrary{{
    {199, 77}, {62, 88}, {19, 13}, {5, 16}, {9, 2}, {12, 25}}};
constexpr std::array<std::array<int, 2>, 8> kFixByLibrary{{
    {184, 73}, {47, 38}, {12, 52}, {16, 13}, {18, 4}, {2, 7}, {1, 6}, {26, 28}}};

std::vector<LabeledBug> shipped()
{
    static const auto bugs = load_dataset(testing::source_dir() / "data/checker_bugs.jsonl");
    return bugs;
}

template <class A, class B>
int count_pair(const std::vector<LabeledBug>& bugs, A TaxonomyLabel::*ma, A a, B TaxonomyLabel::*mb, B b)
{
    return static_cast<int>(std::count_if(bugs.begin(), bugs.end(), [&](const LabeledBug& x) {
        return x.label.*ma == a && x.label.*mb == b;
    }));
}

std::string record(const std::string& sha, const std::string& violation, const std::string& element)
{
    return nlohmann::json{{"sha", sha},           {"repo", "pytorch"},     {"violation", violation},
                          {"element", element},   {"symptom", "ProgramCrash"}, {"action", "Add"},
                          {"condition", "IfChecker"}, {"fix_element", "Tensor"}, {"message", "m"},
                          {"diff", ""}}
        .dump()
        + "\n";
}

} // namespace

TEST_CASE("published tables are internally consistent")
{
    for (std::size_t e = 0; e < kElementByViolation.size(); ++e)
        CHECK(std::accumulate(kElementByViolation[e].begin(), kElementByViolation[e].end(), 0) == kElementTotals[e]);
    for (std::size_t v = 0; v < 5; ++v) {
        int s = 0;
        for (const auto& row : kElementByViolation)
            s += row[v];
        CHECK(s == kViolationTotals[v]);
    }
    for (std::size_t a = 0; a < 7; ++a) {
        int s = 0;
        for (const auto& row : kConditionByAction)
            s += row[a];
        CHECK(s == kActionTotals[a]);
    }
    CHECK(std::accumulate(kElementTotals.begin(), kElementTotals.end(), 0) == 527);
    CHECK(std::accumulate(kConditionTotals.begin(), kConditionTotals.end(), 0) == 527);
}

TEST_CASE("shipped dataset reproduces every published cell")
{
    auto bugs = shipped();
    REQUIRE(bugs.size() == 527);

    auto elements = all_values<Element>();
    auto violations = all_values<Violation>();
    for (std::size_t e = 0; e < elements.size(); ++e)
        for (std::size_t v = 0; v < violations.size(); ++v)
            CHECK_MESSAGE(count_pair(bugs, &TaxonomyLabel::element, elements[e], &TaxonomyLabel::violation,
                                     violations[v])
                              == kElementByViolation[e][v],
                          to_string(elements[e]), " x ", to_string(violations[v]));

    auto conditions = all_values<Condition>();
    auto actions = all_values<Action>();
    for (std::size_t c = 0; c < conditions.size(); ++c)
        for (std::size_t a = 0; a < actions.size(); ++a)
            CHECK(count_pair(bugs, &TaxonomyLabel::condition, conditions[c], &TaxonomyLabel::action, actions[a])
                  == kConditionByAction[c][a]);

    auto by_repo = [&](auto member, auto value, const std::string& repo) {
        return std::count_if(bugs.begin(), bugs.end(),
                             [&](const LabeledBug& b) { return b.repo == repo && b.label.*member == value; });
    };
    auto symptoms = all_values<Symptom>();
    for (std::size_t s = 0; s < symptoms.size(); ++s) {
        CHECK(by_repo(&TaxonomyLabel::symptom, symptoms[s], "tensorflow") == kSymptomByLibrary[s][0]);
        CHECK(by_repo(&TaxonomyLabel::symptom, symptoms[s], "pytorch") == kSymptomByLibrary[s][1]);
    }
    auto fixes = all_values<FixElement>();
    for (std::size_t f = 0; f < fixes.size(); ++f) {
        CHECK(by_repo(&TaxonomyLabel::fix_element, fixes[f], "tensorflow") == kFixByLibrary[f][0]);
        CHECK(by_repo(&TaxonomyLabel::fix_element, fixes[f], "pytorch") == kFixByLibrary[f][1]);
    }

    auto el = marginals(bugs, "element");
    CHECK(el.at("EdgeCases") == 237);
    CHECK(el.at("Others") == 21);
    auto fe = marginals(bugs, Facet::FixElement);
    CHECK(fe.at("Tensor") == 257);
    for (auto facet : {"violation", "element", "symptom", "action", "condition", "fix_element"}) {
        auto m = marginals(bugs, facet);
        std::size_t sum = 0;
        for (const auto& [k, n] : m)
            sum += n;
        CHECK(sum == 527);
    }
    for (const auto& b : bugs) {
        CHECK(is_consistent(b.label));
        CHECK_FALSE(b.change.file_path.empty());
    }
}

TEST_CASE("generator is deterministic and matches the shipped file")
{
    auto a = generate_synthetic_dataset(0);
    auto b = generate_synthetic_dataset(0);
    REQUIRE(a.size() == 527);
    auto bugs = shipped();
    for (std::size_t i = 0; i < a.size(); ++i) {
        CHECK(to_record(a[i]) == to_record(b[i]));
        CHECK(to_record(a[i]) == to_record(bugs[i]));
    }
    auto other = generate_synthetic_dataset(1);
    CHECK(marginals(other, Facet::Element) == marginals(a, Facet::Element));
}

TEST_CASE("dataset write and reload round trip")
{
    TempDir tmp;
    auto bugs = shipped();
    write_dataset(tmp / "d.jsonl", bugs);
    auto back = load_dataset(tmp / "d.jsonl");
    REQUIRE(back.size() == bugs.size());
    for (std::size_t i = 0; i < bugs.size(); ++i) {
        CHECK(back[i].label == bugs[i].label);
        CHECK(back[i].change == bugs[i].change);
    }
}

TEST_CASE("invalid dataset records")
{
    TempDir tmp;
    testing::write_text(tmp / "bad.jsonl", record("a", "Missing", "EdgeCases") + record("b", "Sneaky", "EdgeCases"));
    try {
        load_dataset(tmp / "bad.jsonl");
        FAIL("expected UnknownCategory");
    } catch (const UnknownCategory& e) {
        CHECK(e.line() == 2);
        CHECK(e.field() == "violation");
    }

    testing::write_text(tmp / "mis.jsonl", record("a", "Misleading", "NullValue"));
    CHECK_THROWS_AS(load_dataset(tmp / "mis.jsonl"), UnknownCategory);
    testing::write_text(tmp / "ok.jsonl", record("a", "Misleading", "ErrorMessage"));
    CHECK(load_dataset(tmp / "ok.jsonl").size() == 1);

    testing::write_text(tmp / "dup.jsonl", record("a", "Missing", "EdgeCases") + record("a", "Missing", "EdgeCases"));
    CHECK_THROWS_AS(load_dataset(tmp / "dup.jsonl"), io::RecordParseError);

    testing::write_text(tmp / "empty.jsonl", "");
    auto none = load_dataset(tmp / "empty.jsonl");
    CHECK(none.empty());
    auto m = marginals(none, Facet::Violation);
    CHECK(m.size() == 5);
    for (const auto& [k, n] : m)
        CHECK(n == 0);

    CHECK_THROWS_AS(marginals(none, "colour"), UnknownFacet);
}

TEST_CASE("few-shot selection")
{
    auto rs = RuleSet::load(testing::source_dir() / "data/ruleset.json");
    CHECK(rs.entries().size() == 12);
    CHECK(rs.fallback().size() == 2);

    RuleSet small;
    auto ex = [](const char* m) { return RuleExample{m, diff::make_change("a.cc", {})}; };
    small.add(Element::DeviceType, ex("one"));
    small.add(Element::DeviceType, ex("two"));
    small.add(Element::DeviceType, ex("three"));
    small.set_fallback({ex("g1"), ex("g2")});

    auto two = select_fewshot_examples(small, Element::DeviceType, 2);
    REQUIRE(two.examples.size() == 2);
    CHECK(two.examples[0].message == "one");
    CHECK(two.examples[1].message == "two");
    CHECK_FALSE(two.used_fallback);
    CHECK(select_fewshot_examples(small, Element::DeviceType, 10).examples.size() == 3);

    auto other = select_fewshot_examples(small, Element::Others, 2);
    CHECK(other.used_fallback);
    CHECK(other.examples[0].message == "g1");
    CHECK(select_fewshot_examples(small, Element::NullValue, 1).used_fallback);

    RuleSet bare;
    bare.add(Element::DeviceType, ex("x"));
    CHECK_THROWS_AS(select_fewshot_examples(bare, Element::NullValue, 1), UnknownElementKey);
    CHECK_THROWS_AS(select_fewshot_examples(small, Element::DeviceType, 0), std::invalid_argument);

    CHECK_THROWS_AS(RuleSet::from_json(nlohmann::json::parse(R"({"Sneaky": [{"message": "m", "diff": "x"}]})")),
                    UnknownElementKey);
}

TEST_CASE("rule set json round trip")
{
    auto bugs = shipped();
    auto rs = build_ruleset(bugs, 3);
    CHECK(rs.entries().size() == 12);
    for (const auto& [k, v] : rs.entries()) {
        CHECK(v.size() == 3);
        CHECK(k != Element::Others);
    }
    auto back = RuleSet::from_json(rs.to_json());
    CHECK(back.to_json() == rs.to_json());
    auto shipped_rs = RuleSet::load(testing::source_dir() / "data/ruleset.json");
    CHECK(shipped_rs.to_json() == rs.to_json());
}
