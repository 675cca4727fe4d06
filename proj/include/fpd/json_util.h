#pragma once

#include <cstdint>
#include <initializer_list>
#include <string>
#include <string_view>

#include "json.hpp"

namespace fpd::json_util {

// Throws DataError naming the first key of `obj` not listed in `allowed`.
void reject_unknown_keys(const nlohmann::json& obj, std::initializer_list<std::string_view> allowed,
                         std::string_view context);

// Throws DataError when `doc` is not an object.
const nlohmann::json& require_object(const nlohmann::json& doc, std::string_view context);

double get_number(const nlohmann::json& obj, const char* key, double fallback);
std::uint64_t get_uint(const nlohmann::json& obj, const char* key, std::uint64_t fallback);
bool get_bool(const nlohmann::json& obj, const char* key, bool fallback);
std::string get_string(const nlohmann::json& obj, const char* key, const std::string& fallback);

// +inf is written as null so the document stays valid JSON.
nlohmann::json number_or_null(double value);
double number_or_inf(const nlohmann::json& value, std::string_view context);

}  // namespace fpd::json_util
