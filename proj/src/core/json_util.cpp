#include "fpd/json_util.h"

#include <algorithm>
#include <cmath>
#include <limits>

#include "fpd/error.h"

namespace fpd::json_util {

using nlohmann::json;

void reject_unknown_keys(const json& obj, std::initializer_list<std::string_view> allowed, std::string_view context) {
    for (const auto& item : obj.items()) {
        if (std::find(allowed.begin(), allowed.end(), item.key()) == allowed.end()) {
            throw DataError(std::string(context) + ": unknown key '" + item.key() + "'");
        }
    }
}

const json& require_object(const json& doc, std::string_view context) {
    if (!doc.is_object()) throw DataError(std::string(context) + ": expected a JSON object");
    return doc;
}

double get_number(const json& obj, const char* key, double fallback) {
    auto it = obj.find(key);
    if (it == obj.end()) return fallback;
    if (!it->is_number()) throw DataError(std::string("'") + key + "' must be a number");
    return it->get<double>();
}

std::uint64_t get_uint(const json& obj, const char* key, std::uint64_t fallback) {
    auto it = obj.find(key);
    if (it == obj.end()) return fallback;
    if (!it->is_number_unsigned() && !(it->is_number_integer() && it->get<std::int64_t>() >= 0)) {
        throw DataError(std::string("'") + key + "' must be a non-negative integer");
    }
    return it->get<std::uint64_t>();
}

bool get_bool(const json& obj, const char* key, bool fallback) {
    auto it = obj.find(key);
    if (it == obj.end()) return fallback;
    if (!it->is_boolean()) throw DataError(std::string("'") + key + "' must be a boolean");
    return it->get<bool>();
}

std::string get_string(const json& obj, const char* key, const std::string& fallback) {
    auto it = obj.find(key);
    if (it == obj.end()) return fallback;
    if (!it->is_string()) throw DataError(std::string("'") + key + "' must be a string");
    return it->get<std::string>();
}

json number_or_null(double value) {
    if (std::isinf(value) && value > 0) return nullptr;
    return value;
}

double number_or_inf(const json& value, std::string_view context) {
    if (value.is_null()) return std::numeric_limits<double>::infinity();
    if (!value.is_number()) throw DataError(std::string(context) + ": expected number or null");
    return value.get<double>();
}

}  // namespace fpd::json_util
