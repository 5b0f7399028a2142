// Copyright 2026 The ppc Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <initializer_list>
#include <json.hpp>
#include <string>
#include <string_view>

#include "ppc/error.hpp"

namespace ppc {

/// Rejects any key of object `j` not listed in `allowed`.
inline void check_keys(const nlohmann::json& j, std::initializer_list<std::string_view> allowed,
                       const std::string& context) {
  if (!j.is_object()) throw_usage(context + ": expected a JSON object");
  for (const auto& [key, value] : j.items()) {
    bool ok = false;
    for (auto a : allowed) ok = ok || key == a;
    if (!ok) throw_usage(context + ": unknown key '" + key + "'");
  }
}

template <class T>
void get_if(const nlohmann::json& j, const char* key, T& out, const std::string& context) {
  if (!j.contains(key)) return;
  try {
    out = j.at(key).get<T>();
  } catch (const nlohmann::json::exception& e) {
    throw_usage(context + "." + key + ": " + e.what());
  }
}

template <class T>
void require(const nlohmann::json& j, const char* key, T& out, const std::string& context) {
  if (!j.contains(key)) throw_usage(context + ": missing required key '" + key + "'");
  get_if(j, key, out, context);
}

}  // namespace ppc
