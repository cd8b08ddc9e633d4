// Synthetic checker-bug dataset. Category counts follow the published
// distribution tables; messages and diffs are templated placeholders.

#include "checkguard/digest.hpp"
#include "checkguard/taxonomy.hpp"

#include <random>

namespace checkguard::taxonomy {

namespace {

// Rows follow Element order; columns follow Violation order.
constexpr int kElementByViolation[13][5] = {
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
};

// Rows follow Condition order; columns follow Action order.
constexpr int kConditionByAction[7][7] = {
    {171, 49, 43, 8, 3, 4, 6}, // IfChecker
    {126, 6, 20, 14, 11, 2, 7}, // MacroChecker
    {12, 3, 9, 0, 3, 0, 0},    // TypeCheckingAPI
    {8, 1, 1, 5, 1, 1, 0},     // AssertionStatement
    {2, 1, 2, 0, 1, 0, 0},     // CheckerAPI
    {0, 3, 1, 0, 0, 0, 0},     // BooleanExpression
    {1, 2, 0, 0, 0, 0, 0},     // TernaryOperator
};

// Symptom order; {pytorch, tensorflow}.
constexpr int kSymptomByRepo[6][2] = {
    {77, 199}, {88, 62}, {13, 19}, {16, 5}, {2, 9}, {25, 12},
};

// FixElement order; {pytorch, tensorflow}.
constexpr int kFixElementByRepo[8][2] = {
    {73, 184}, {38, 47}, {52, 12}, {13, 16}, {4, 18}, {7, 2}, {6, 1}, {28, 26},
};

constexpr int kPyTorchBugs = 221;
constexpr int kTensorFlowBugs = 306;

template <class T>
void shuffle(std::vector<T>& v, std::mt19937_64& rng)
{
    // Fisher-Yates with raw engine output: std::shuffle's distribution is
    // implementation-defined and would make the fixture library-dependent.
    for (std::size_t i = v.size(); i > 1; --i) {
        std::size_t j = static_cast<std::size_t>(rng() % i);
        std::swap(v[i - 1], v[j]);
    }
}

constexpr std::string_view kOps[] = {"conv2d", "gather", "scatter_add", "reshape", "softmax",
                                     "embedding_bag", "segment_sum", "topk", "unique", "pad",
                                     "matmul", "slice", "tile", "bincount", "resize_bilinear"};

std::string_view subject(Element e)
{
    switch (e) {
    case Element::EdgeCases:
        return "empty input tensor";
    case Element::TypeChecking:
        return "dtype";
    case Element::NullValue:
        return "null pointer";
    case Element::BoundaryValue:
        return "index bound";
    case Element::DeviceAvailability:
        return "device availability";
    case Element::ErrorMessage:
        return "error message";
    case Element::DeviceType:
        return "device type";
    case Element::DeviceVersion:
        return "device version";
    case Element::ExecutionMode:
        return "execution mode";
    case Element::ComputationGraph:
        return "graph node";
    case Element::TensorQuantization:
        return "quantized tensor";
    case Element::BackendType:
        return "backend type";
    case Element::Others:
        break;
    }
    return "input";
}

std::string_view predicate(Element e)
{
    switch (e) {
    case Element::EdgeCases:
        return "input.numel() > 0";
    case Element::TypeChecking:
        return "input.scalar_type() == kInt";
    case Element::NullValue:
        return "ptr != nullptr";
    case Element::BoundaryValue:
        return "idx < input.dim()";
    case Element::DeviceAvailability:
        return "at::cuda::is_available()";
    case Element::ErrorMessage:
        return "ok";
    case Element::DeviceType:
        return "input.is_cuda()";
    case Element::DeviceVersion:
        return "prop->major >= 7";
    case Element::ExecutionMode:
        return "!context.executing_eagerly()";
    case Element::ComputationGraph:
        return "node->num_inputs() == 2";
    case Element::TensorQuantization:
        return "input.is_quantized()";
    case Element::BackendType:
        return "backend == Backend::CUDA";
    case Element::Others:
        break;
    }
    return "valid";
}

std::string_view verb(Action a)
{
    switch (a) {
    case Action::Add:
        return "Add missing";
    case Action::Extend:
        return "Extend";
    case Action::Update:
        return "Fix";
    case Action::Improve:
        return "Improve";
    case Action::Replace:
        return "Replace";
    case Action::Relocate:
        return "Move";
    case Action::Remove:
        break;
    }
    return "Remove redundant";
}

std::string check_line(Condition c, bool pytorch, const std::string& pred, const std::string& msg)
{
    switch (c) {
    case Condition::IfChecker:
        return "  if (!(" + pred + ")) { return false; }";
    case Condition::MacroChecker:
        return pytorch ? "  TORCH_CHECK(" + pred + ", \"" + msg + "\");"
                       : "  OP_REQUIRES(ctx, " + pred + ", errors::InvalidArgument(\"" + msg + "\"));";
    case Condition::TypeCheckingAPI:
        return pytorch ? "  TORCH_CHECK(isIntegralType(input.scalar_type(), false), \"" + msg + "\");"
                       : "  OP_REQUIRES(ctx, DataTypeIsInteger(input.dtype()), errors::InvalidArgument(\"" + msg + "\"));";
    case Condition::AssertionStatement:
        return pytorch ? "  TORCH_INTERNAL_ASSERT(" + pred + ");" : "  DCHECK(" + pred + ");";
    case Condition::CheckerAPI:
        return "  if (!isCompatibleScope(node)) { return; }";
    case Condition::BooleanExpression:
        return "  return status.ok() && " + pred + ";";
    case Condition::TernaryOperator:
        break;
    }
    return "  auto n = (" + pred + ") ? input.size(0) : 0;";
}

diff::CodeChange synth_change(std::size_t idx, bool pytorch, const TaxonomyLabel& label)
{
    const auto op = std::string(kOps[idx % std::size(kOps)]);
    const std::string path = pytorch ? "aten/src/ATen/native/" + op + ".cpp"
                                     : "tensorflow/core/kernels/" + op + "_op.cc";
    const std::string pred = std::string(predicate(label.element));
    const std::string msg = op + ": invalid " + std::string(subject(label.element));
    const std::string line = check_line(label.condition, pytorch, pred, msg);
    const std::string anchor = "  auto out = compute_" + op + "(input);";
    const long start = 10 + static_cast<long>(idx % 90);

    diff::Hunk h;
    auto hdr = [&](long ol, long nl) {
        h.old_start = start;
        h.old_len = ol;
        h.new_start = start;
        h.new_len = nl;
        h.header = "@@ -" + std::to_string(start) + "," + std::to_string(ol) + " +" + std::to_string(start) + ","
            + std::to_string(nl) + " @@";
    };

    switch (label.action) {
    case Action::Add:
        hdr(1, 2);
        h.lines = {{diff::LineTag::Added, line}, {diff::LineTag::Context, anchor}};
        break;
    case Action::Remove:
        hdr(2, 1);
        h.lines = {{diff::LineTag::Removed, line}, {diff::LineTag::Context, anchor}};
        break;
    case Action::Relocate:
        hdr(2, 2);
        h.lines = {{diff::LineTag::Removed, anchor}, {diff::LineTag::Context, line}, {diff::LineTag::Added, anchor}};
        break;
    default: {
        const std::string old_line = check_line(label.condition, pytorch, "true", op + ": bad input");
        hdr(2, 2);
        h.lines = {{diff::LineTag::Removed, old_line}, {diff::LineTag::Added, line}, {diff::LineTag::Context, anchor}};
        break;
    }
    }
    return diff::make_change(path, {std::move(h)});
}

} // namespace

std::vector<LabeledBug> generate_synthetic_dataset(std::uint64_t seed)
{
    std::mt19937_64 rng(seed);

    std::vector<std::pair<Element, Violation>> ev;
    for (std::size_t r = 0; r < 13; ++r)
        for (std::size_t c = 0; c < 5; ++c)
            for (int n = 0; n < kElementByViolation[r][c]; ++n)
                ev.emplace_back(all_values<Element>()[r], all_values<Violation>()[c]);

    std::vector<std::pair<Condition, Action>> ca;
    for (std::size_t r = 0; r < 7; ++r)
        for (std::size_t c = 0; c < 7; ++c)
            for (int n = 0; n < kConditionByAction[r][c]; ++n)
                ca.emplace_back(all_values<Condition>()[r], all_values<Action>()[c]);

    auto per_repo = [](const auto& table, auto values, int repo) {
        std::vector<typename decltype(values)::value_type> out;
        for (std::size_t r = 0; r < values.size(); ++r)
            for (int n = 0; n < table[r][repo]; ++n)
                out.push_back(values[r]);
        return out;
    };
    auto sym_pt = per_repo(kSymptomByRepo, all_values<Symptom>(), 0);
    auto sym_tf = per_repo(kSymptomByRepo, all_values<Symptom>(), 1);
    auto fix_pt = per_repo(kFixElementByRepo, all_values<FixElement>(), 0);
    auto fix_tf = per_repo(kFixElementByRepo, all_values<FixElement>(), 1);

    shuffle(ev, rng);
    shuffle(ca, rng);
    shuffle(sym_pt, rng);
    shuffle(sym_tf, rng);
    shuffle(fix_pt, rng);
    shuffle(fix_tf, rng);

    std::vector<LabeledBug> bugs;
    bugs.reserve(kPyTorchBugs + kTensorFlowBugs);
    for (std::size_t i = 0; i < ev.size(); ++i) {
        const bool pytorch = i < kPyTorchBugs;
        const std::size_t local = pytorch ? i : i - kPyTorchBugs;
        LabeledBug b;
        b.repo = pytorch ? "pytorch" : "tensorflow";
        b.label.element = ev[i].first;
        b.label.violation = ev[i].second;
        b.label.condition = ca[i].first;
        b.label.action = ca[i].second;
        b.label.symptom = pytorch ? sym_pt[local] : sym_tf[local];
        b.label.fix_element = pytorch ? fix_pt[local] : fix_tf[local];
        b.commit_sha = sha256_hex("synthetic-checker-bug:" + std::to_string(seed) + ":" + std::to_string(i)).substr(0, 40);
        b.message = "[synthetic] " + std::string(verb(b.label.action)) + " " + std::string(subject(b.label.element))
            + " check in " + std::string(kOps[i % std::size(kOps)]);
        b.change = synth_change(i, pytorch, b.label);
        bugs.push_back(std::move(b));
    }
    return bugs;
}

} // namespace checkguard::taxonomy
