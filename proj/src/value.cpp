#include "srv/value.hpp"

#include <algorithm>
#include <bit>
#include <charconv>
#include <limits>

namespace srv {

const char* errc_name(Errc code) {
    switch (code) {
    case Errc::Type: return "TypeError";
    case Errc::Evaluation: return "EvaluationError";
    case Errc::Registration: return "RegistrationError";
    case Errc::InstantMismatch: return "InstantMismatch";
    case Errc::NoVerdict: return "NoVerdict";
    case Errc::VersionMismatch: return "VersionMismatch";
    case Errc::Integrity: return "IntegrityError";
    case Errc::InstallIntegrity: return "InstallIntegrity";
    case Errc::Filter: return "FilterError";
    case Errc::Adapter: return "AdapterError";
    case Errc::Io: return "IoError";
    case Errc::Parse: return "ParseError";
    case Errc::Validation: return "ValidationError";
    case Errc::Usage: return "UsageError";
    }
    return "Error";
}

const char* kind_name(ValueKind kind) {
    switch (kind) {
    case ValueKind::Unit: return "Unit";
    case ValueKind::Bool: return "Bool";
    case ValueKind::Int: return "Int";
    case ValueKind::Float: return "Float";
    case ValueKind::Text: return "Text";
    case ValueKind::Optional: return "Optional";
    case ValueKind::Set: return "Set";
    case ValueKind::Map: return "Map";
    case ValueKind::List: return "List";
    case ValueKind::Record: return "Record";
    }
    return "?";
}

Value Value::boolean(bool b) { return Value(Storage(b)); }
Value Value::integer(std::int64_t i) { return Value(Storage(i)); }
Value Value::real(double d) { return Value(Storage(d)); }
Value Value::text(std::string s) { return Value(Storage(std::move(s))); }
Value Value::none() { return Value(Storage(std::shared_ptr<const Value>())); }
Value Value::some(Value v) { return Value(Storage(std::make_shared<const Value>(std::move(v)))); }
Value Value::set(ValueSet s) { return Value(Storage(std::make_shared<const ValueSet>(std::move(s)))); }
Value Value::map(ValueMap m) { return Value(Storage(std::make_shared<const ValueMap>(std::move(m)))); }
Value Value::list(ValueList l) { return Value(Storage(std::make_shared<const ValueList>(std::move(l)))); }

Value Value::record(std::vector<std::pair<std::string, Value>> fields) {
    std::sort(fields.begin(), fields.end(),
              [](const auto& a, const auto& b) { return a.first < b.first; });
    RecordData data;
    data.names.reserve(fields.size());
    data.values.reserve(fields.size());
    for (auto& [name, value] : fields) {
        if (!data.names.empty() && data.names.back() == name) {
            throw Error(Errc::Type, "duplicate record field '" + name + "'");
        }
        data.names.push_back(std::move(name));
        data.values.push_back(std::move(value));
    }
    return Value(Storage(std::make_shared<const RecordData>(std::move(data))));
}

ValueKind Value::kind() const noexcept { return static_cast<ValueKind>(storage_.index()); }

void Value::kind_error(ValueKind expected) const {
    throw Error(Errc::Type, std::string("expected ") + kind_name(expected) + ", got " +
                                kind_name(kind()) + " " + str());
}

bool Value::as_bool() const {
    if (auto* b = std::get_if<bool>(&storage_)) return *b;
    kind_error(ValueKind::Bool);
}

std::int64_t Value::as_int() const {
    if (auto* i = std::get_if<std::int64_t>(&storage_)) return *i;
    kind_error(ValueKind::Int);
}

double Value::as_float() const {
    if (auto* d = std::get_if<double>(&storage_)) return *d;
    kind_error(ValueKind::Float);
}

const std::string& Value::as_text() const {
    if (auto* s = std::get_if<std::string>(&storage_)) return *s;
    kind_error(ValueKind::Text);
}

bool Value::is_some() const {
    if (auto* o = std::get_if<std::shared_ptr<const Value>>(&storage_)) return *o != nullptr;
    kind_error(ValueKind::Optional);
}

const Value& Value::unwrap() const {
    if (auto* o = std::get_if<std::shared_ptr<const Value>>(&storage_)) {
        if (*o) return **o;
        throw Error(Errc::Evaluation, "unwrap of empty optional");
    }
    kind_error(ValueKind::Optional);
}

const ValueSet& Value::as_set() const {
    if (auto* s = std::get_if<std::shared_ptr<const ValueSet>>(&storage_)) return **s;
    kind_error(ValueKind::Set);
}

const ValueMap& Value::as_map() const {
    if (auto* m = std::get_if<std::shared_ptr<const ValueMap>>(&storage_)) return **m;
    kind_error(ValueKind::Map);
}

const ValueList& Value::as_list() const {
    if (auto* l = std::get_if<std::shared_ptr<const ValueList>>(&storage_)) return **l;
    kind_error(ValueKind::List);
}

const RecordData& Value::as_record() const {
    if (auto* r = std::get_if<std::shared_ptr<const RecordData>>(&storage_)) return **r;
    kind_error(ValueKind::Record);
}

const Value* Value::find_field(std::string_view name) const {
    const auto& rec = as_record();
    auto it = std::lower_bound(rec.names.begin(), rec.names.end(), name);
    if (it == rec.names.end() || *it != name) return nullptr;
    return &rec.values[static_cast<std::size_t>(it - rec.names.begin())];
}

const Value& Value::field(std::string_view name) const {
    if (const Value* v = find_field(name)) return *v;
    throw Error(Errc::Evaluation, "record " + str() + " has no field '" + std::string(name) + "'");
}

const void* Value::identity() const noexcept {
    return std::visit(
        [](const auto& alt) -> const void* {
            using T = std::decay_t<decltype(alt)>;
            if constexpr (std::is_same_v<T, std::shared_ptr<const Value>> ||
                          std::is_same_v<T, std::shared_ptr<const ValueSet>> ||
                          std::is_same_v<T, std::shared_ptr<const ValueMap>> ||
                          std::is_same_v<T, std::shared_ptr<const ValueList>> ||
                          std::is_same_v<T, std::shared_ptr<const RecordData>>) {
                return alt.get();
            } else {
                return nullptr;
            }
        },
        storage_);
}

std::strong_ordering compare_floats(double a, double b) {
    auto key = [](double d) {
        auto bits = std::bit_cast<std::int64_t>(d);
        return bits < 0 ? (bits ^ std::numeric_limits<std::int64_t>::max()) : bits;
    };
    return key(a) <=> key(b);
}

namespace {

template <typename Range>
std::strong_ordering compare_ranges(const Range& a, const Range& b) {
    auto ia = a.begin();
    auto ib = b.begin();
    for (; ia != a.end() && ib != b.end(); ++ia, ++ib) {
        if (auto c = *ia <=> *ib; c != 0) return c;
    }
    if (ia == a.end() && ib == b.end()) return std::strong_ordering::equal;
    return ia == a.end() ? std::strong_ordering::less : std::strong_ordering::greater;
}

std::strong_ordering compare_entries(const std::pair<const Value, Value>& a,
                                     const std::pair<const Value, Value>& b) {
    if (auto c = a.first <=> b.first; c != 0) return c;
    return a.second <=> b.second;
}

} // namespace

std::strong_ordering operator<=>(const Value& a, const Value& b) {
    if (auto c = a.storage_.index() <=> b.storage_.index(); c != 0) return c;
    if (a.identity() != nullptr && a.identity() == b.identity()) return std::strong_ordering::equal;
    switch (a.kind()) {
    case ValueKind::Unit: return std::strong_ordering::equal;
    case ValueKind::Bool: return a.as_bool() <=> b.as_bool();
    case ValueKind::Int: return a.as_int() <=> b.as_int();
    case ValueKind::Float: return compare_floats(a.as_float(), b.as_float());
    case ValueKind::Text: return a.as_text().compare(b.as_text()) <=> 0;
    case ValueKind::Optional: {
        bool sa = a.is_some();
        bool sb = b.is_some();
        if (sa != sb) return sa <=> sb;
        return sa ? a.unwrap() <=> b.unwrap() : std::strong_ordering::equal;
    }
    case ValueKind::Set: return compare_ranges(a.as_set(), b.as_set());
    case ValueKind::List: return compare_ranges(a.as_list(), b.as_list());
    case ValueKind::Map: {
        const auto& ma = a.as_map();
        const auto& mb = b.as_map();
        auto ia = ma.begin();
        auto ib = mb.begin();
        for (; ia != ma.end() && ib != mb.end(); ++ia, ++ib) {
            if (auto c = compare_entries(*ia, *ib); c != 0) return c;
        }
        if (ia == ma.end() && ib == mb.end()) return std::strong_ordering::equal;
        return ia == ma.end() ? std::strong_ordering::less : std::strong_ordering::greater;
    }
    case ValueKind::Record: {
        const auto& ra = a.as_record();
        const auto& rb = b.as_record();
        if (auto c = compare_ranges(ra.names, rb.names); c != 0) return c;
        return compare_ranges(ra.values, rb.values);
    }
    }
    return std::strong_ordering::equal;
}

bool operator==(const Value& a, const Value& b) { return (a <=> b) == 0; }

namespace {

void append_float(std::string& out, double d) {
    char buf[64];
    auto res = std::to_chars(buf, buf + sizeof buf, d);
    std::string_view s(buf, static_cast<std::size_t>(res.ptr - buf));
    out += s;
    if (s.find_first_of(".eEn") == std::string_view::npos) out += ".0";
}

void append_quoted(std::string& out, const std::string& s) {
    out += '"';
    for (char c : s) {
        if (c == '"' || c == '\\') out += '\\';
        out += c;
    }
    out += '"';
}

void append(std::string& out, const Value& v) {
    switch (v.kind()) {
    case ValueKind::Unit: out += "()"; break;
    case ValueKind::Bool: out += v.as_bool() ? "true" : "false"; break;
    case ValueKind::Int: out += std::to_string(v.as_int()); break;
    case ValueKind::Float: append_float(out, v.as_float()); break;
    case ValueKind::Text: append_quoted(out, v.as_text()); break;
    case ValueKind::Optional:
        if (v.is_some()) {
            out += "Just(";
            append(out, v.unwrap());
            out += ')';
        } else {
            out += "Nothing";
        }
        break;
    case ValueKind::Set: {
        out += '{';
        bool first = true;
        for (const auto& e : v.as_set()) {
            if (!first) out += ", ";
            first = false;
            append(out, e);
        }
        out += '}';
        break;
    }
    case ValueKind::Map: {
        if (v.as_map().empty()) {
            out += "{:}";
            break;
        }
        out += '{';
        bool first = true;
        for (const auto& [k, e] : v.as_map()) {
            if (!first) out += ", ";
            first = false;
            append(out, k);
            out += ": ";
            append(out, e);
        }
        out += '}';
        break;
    }
    case ValueKind::List: {
        out += '[';
        bool first = true;
        for (const auto& e : v.as_list()) {
            if (!first) out += ", ";
            first = false;
            append(out, e);
        }
        out += ']';
        break;
    }
    case ValueKind::Record: {
        const auto& rec = v.as_record();
        out += '<';
        for (std::size_t i = 0; i < rec.names.size(); ++i) {
            if (i) out += ", ";
            out += rec.names[i];
            out += " = ";
            append(out, rec.values[i]);
        }
        out += '>';
        break;
    }
    }
}

} // namespace

std::string Value::str() const {
    std::string out;
    append(out, *this);
    return out;
}

} // namespace srv
