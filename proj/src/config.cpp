#include "gemhp/config.hpp"

#include "gemhp/error.hpp"

#include <json.hpp>

#include <cstdio>
#include <fstream>
#include <initializer_list>
#include <sstream>

namespace gemhp {

using nlohmann::json;

namespace {

[[noreturn]] void fail(const std::string& where, const std::string& what) {
    throw Error(ErrorKind::InvalidInput, "model " + where + ": " + what);
}

void only_keys(const json& j, const std::string& where, std::initializer_list<std::string_view> allowed) {
    if (!j.is_object()) fail(where, "expected an object");
    for (const auto& [key, value] : j.items()) {
        bool ok = false;
        for (auto a : allowed) ok = ok || key == a;
        if (!ok) fail(where, "unknown field '" + key + "'");
    }
}

const json& need(const json& j, const std::string& where, const char* key) {
    if (!j.contains(key)) fail(where, std::string("missing field '") + key + "'");
    return j.at(key);
}

double number(const json& j, const std::string& where) {
    if (!j.is_number()) fail(where, "expected a number");
    return j.get<double>();
}

int integer(const json& j, const std::string& where) {
    if (!j.is_number_integer()) fail(where, "expected an integer");
    return j.get<int>();
}

class Parser {
public:
    explicit Parser(ModelSpec& spec) : spec_(spec) {}

    Slot slot(const json& j, const std::string& where) const {
        if (j.is_number()) return Slot::fixed(j.get<double>());
        if (j.is_string()) {
            const int idx = spec_.parameter_index(j.get<std::string>());
            if (idx < 0) fail(where, "unknown parameter '" + j.get<std::string>() + "'");
            return Slot::param(idx);
        }
        fail(where, "expected a number or a parameter name");
    }

    Slot slot_or(const json& j, const char* key, double fallback, const std::string& where) const {
        return j.contains(key) ? slot(j.at(key), where + "." + key) : Slot::fixed(fallback);
    }

    std::vector<Slot> slots(const json& j, const std::string& where) const {
        if (!j.is_array() || j.empty()) fail(where, "expected a non-empty array");
        std::vector<Slot> out;
        for (std::size_t i = 0; i < j.size(); ++i) out.push_back(slot(j[i], where + "[" + std::to_string(i) + "]"));
        return out;
    }

    MarkFunctionTemplate function(const json& j, const std::string& where) const {
        only_keys(j, where, {"form", "coef"});
        const json& form = need(j, where, "form");
        if (!form.is_string()) fail(where, "form must be a string");
        MarkFunctionTemplate f;
        f.form = function_form_from_string(form.get<std::string>());
        f.coef = slots(need(j, where, "coef"), where + ".coef");
        return f;
    }

    TermTemplate term(const json& j, const std::string& where) const {
        only_keys(j, where, {"poly", "r", "c", "d", "xi"});
        TermTemplate t;
        t.poly = slots(need(j, where, "poly"), where + ".poly");
        t.decay = slot(need(j, where, "r"), where + ".r");
        t.cos_weight = slot_or(j, "c", 0.0, where);
        t.sin_weight = slot_or(j, "d", 0.0, where);
        t.frequency = slot_or(j, "xi", 0.0, where);
        return t;
    }

    MarkKernelTemplate mark_kernel(const json& j, const std::string& where) const {
        const json& fam = need(j, where, "family");
        if (!fam.is_string()) fail(where, "family must be a string");
        const std::string name = fam.get<std::string>();
        MarkKernelTemplate m;
        if (name == "iid-gaussian") {
            only_keys(j, where, {"family", "mean", "sd"});
            m.family = MarkFamily::IidGaussian;
            m.mean = slot_or(j, "mean", 0.0, where);
            m.sd = slot_or(j, "sd", 1.0, where);
        } else if (name == "gaussian-ar1") {
            only_keys(j, where, {"family", "mean", "coef", "sd"});
            m.family = MarkFamily::GaussianAr1;
            m.mean = slot_or(j, "mean", 0.0, where);
            m.coef = slot_or(j, "coef", 0.0, where);
            m.sd = slot_or(j, "sd", 1.0, where);
        } else if (name == "iid-categorical") {
            only_keys(j, where, {"family", "weights"});
            m.family = MarkFamily::IidCategorical;
            m.weights = slots(need(j, where, "weights"), where + ".weights");
        } else if (name == "queue-reactive-dirac") {
            only_keys(j, where, {"family", "step"});
            m.family = MarkFamily::QueueReactiveDirac;
            m.step = integer(need(j, where, "step"), where + ".step");
        } else {
            fail(where, "unknown mark family '" + name + "' (custom kernels are library-only)");
        }
        return m;
    }

    Mark mark(const json& j, const std::string& where) const {
        if (j.is_number()) return Mark{j.get<double>()};
        if (!j.is_array()) fail(where, "a mark is a number or an array of numbers");
        Mark x;
        for (const auto& v : j) x.push_back(number(v, where));
        return x;
    }

private:
    ModelSpec& spec_;
};

} // namespace

ModelSpec parse_model(std::string_view json_text) {
    json root;
    try {
        root = json::parse(json_text);
    } catch (const json::parse_error& e) {
        throw Error(ErrorKind::InvalidInput, std::string("model is not valid JSON: ") + e.what());
    }
    only_keys(root, "document",
              {"schema", "components", "parameters", "marks", "baselines", "kernels", "link", "floors", "probe", "x0"});
    const json& schema = need(root, "document", "schema");
    if (!schema.is_string() || schema.get<std::string>() != kModelSchema) {
        fail("document", "schema must be \"" + std::string(kModelSchema) + "\"");
    }

    ModelSpec spec;
    spec.d = integer(need(root, "document", "components"), "components");
    if (spec.d < 1) fail("components", "must be >= 1");
    Parser p(spec);

    const json& params = need(root, "document", "parameters");
    if (!params.is_array()) fail("parameters", "expected an array");
    for (std::size_t i = 0; i < params.size(); ++i) {
        const std::string where = "parameters[" + std::to_string(i) + "]";
        only_keys(params[i], where, {"name", "lower", "upper", "value"});
        ParameterInfo info;
        const json& name = need(params[i], where, "name");
        if (!name.is_string()) fail(where, "name must be a string");
        info.name = name.get<std::string>();
        info.lower = number(need(params[i], where, "lower"), where + ".lower");
        info.upper = number(need(params[i], where, "upper"), where + ".upper");
        info.value = params[i].contains("value") ? number(params[i].at("value"), where + ".value")
                                                 : 0.5 * (info.lower + info.upper);
        spec.parameters.push_back(std::move(info));
    }

    if (root.contains("marks")) {
        const json& marks = root.at("marks");
        only_keys(marks, "marks", {"space", "kernels"});
        const json& space = need(marks, "marks", "space");
        only_keys(space, "marks.space", {"kind", "dim", "levels"});
        const json& kind = need(space, "marks.space", "kind");
        if (!kind.is_string()) fail("marks.space", "kind must be a string");
        const std::string k = kind.get<std::string>();
        if (k == "continuous") {
            spec.marks = MarkSpace::continuous(space.contains("dim") ? integer(space.at("dim"), "marks.space.dim") : 1);
        } else if (k == "discrete") {
            spec.marks = MarkSpace::discrete();
        } else if (k == "categorical") {
            spec.marks = MarkSpace::categorical(integer(need(space, "marks.space", "levels"), "marks.space.levels"));
        } else {
            fail("marks.space", "kind must be continuous, discrete or categorical");
        }
        const json& kernels = need(marks, "marks", "kernels");
        if (kernels.is_object()) {
            const MarkKernelTemplate m = p.mark_kernel(kernels, "marks.kernels");
            spec.mark_kernels.assign(static_cast<std::size_t>(spec.d), m);
        } else if (kernels.is_array()) {
            for (std::size_t i = 0; i < kernels.size(); ++i) {
                spec.mark_kernels.push_back(p.mark_kernel(kernels[i], "marks.kernels[" + std::to_string(i) + "]"));
            }
        } else {
            fail("marks.kernels", "expected an object or an array");
        }
    } else {
        spec.marks = MarkSpace::categorical(1);
        MarkKernelTemplate m;
        m.family = MarkFamily::IidCategorical;
        m.weights = {Slot::fixed(1.0)};
        spec.mark_kernels.assign(static_cast<std::size_t>(spec.d), m);
    }

    const json& baselines = need(root, "document", "baselines");
    if (!baselines.is_array()) fail("baselines", "expected an array");
    for (std::size_t i = 0; i < baselines.size(); ++i) {
        spec.baselines.push_back(p.function(baselines[i], "baselines[" + std::to_string(i) + "]"));
    }

    if (root.contains("kernels")) {
        const json& kernels = root.at("kernels");
        if (!kernels.is_array()) fail("kernels", "expected an array");
        for (std::size_t i = 0; i < kernels.size(); ++i) {
            const std::string where = "kernels[" + std::to_string(i) + "]";
            only_keys(kernels[i], where, {"target", "source", "terms", "boost"});
            KernelTemplate k;
            k.target = integer(need(kernels[i], where, "target"), where + ".target");
            k.source = integer(need(kernels[i], where, "source"), where + ".source");
            const json& terms = need(kernels[i], where, "terms");
            if (!terms.is_array()) fail(where + ".terms", "expected an array");
            for (std::size_t t = 0; t < terms.size(); ++t) {
                k.terms.push_back(p.term(terms[t], where + ".terms[" + std::to_string(t) + "]"));
            }
            if (kernels[i].contains("boost")) k.boost = p.function(kernels[i].at("boost"), where + ".boost");
            spec.kernels.push_back(std::move(k));
        }
    }

    if (root.contains("link")) {
        const json& link = root.at("link");
        only_keys(link, "link", {"type", "cap"});
        const json& type = need(link, "link", "type");
        if (type == "linear") {
            if (link.contains("cap")) fail("link", "cap only applies to the saturating link");
            spec.link.kind = Link::Kind::Linear;
        } else if (type == "saturating") {
            spec.link.kind = Link::Kind::Saturating;
            spec.link.cap = number(need(link, "link", "cap"), "link.cap");
        } else {
            fail("link", "type must be linear or saturating");
        }
    }

    if (root.contains("floors")) {
        const json& floors = root.at("floors");
        only_keys(floors, "floors", {"r_min", "phi_min", "g_min"});
        if (floors.contains("r_min")) spec.floors.r_min = number(floors.at("r_min"), "floors.r_min");
        if (floors.contains("phi_min")) spec.floors.phi_min = number(floors.at("phi_min"), "floors.phi_min");
        if (floors.contains("g_min")) spec.floors.g_min = number(floors.at("g_min"), "floors.g_min");
    }

    if (root.contains("probe")) {
        const json& probe = root.at("probe");
        if (!probe.is_array()) fail("probe", "expected an array of marks");
        for (std::size_t i = 0; i < probe.size(); ++i) {
            spec.probe.push_back(p.mark(probe[i], "probe[" + std::to_string(i) + "]"));
        }
    }
    if (root.contains("x0")) spec.x0 = p.mark(root.at("x0"), "x0");

    spec.validate();
    return spec;
}

std::string read_text_file(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw Error(ErrorKind::InvalidInput, "cannot open '" + path + "'");
    std::ostringstream ss;
    ss << is.rdbuf();
    return ss.str();
}

ModelSpec load_model(const std::string& path) {
    const std::string text = read_text_file(path);
    try {
        return parse_model(text);
    } catch (const Error& e) {
        const std::string prefix = std::string(to_string(e.kind())) + ": ";
        std::string msg = e.what();
        if (msg.rfind(prefix, 0) == 0) msg.erase(0, prefix.size());
        throw Error(e.kind(), path + ": " + msg);
    }
}

std::uint64_t fnv1a64(std::string_view data, std::uint64_t basis) noexcept {
    std::uint64_t h = basis;
    for (unsigned char c : data) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

std::string hex64(std::uint64_t v) {
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
    return buf;
}

} // namespace gemhp
