#include "caudit/domain.hpp"

namespace caudit {

namespace {

constexpr std::array<std::string_view, Persona::kCount> kPersonaLabels = {
    "Adult",     "Arts",      "Business", "Computers", "Games",   "Health",
    "Home",      "Kids",      "News",     "Recreation", "Reference", "Regional",
    "Science",   "Shopping",  "Society",  "Sports",    "Control"};

}  // namespace

std::string_view to_label(Regime r) { return r == Regime::GDPR ? "GDPR" : "CCPA"; }

std::string_view to_label(Mechanism m) {
  switch (m) {
    case Mechanism::OneTrust: return "OneTrust";
    case Mechanism::CookieBot: return "CookieBot";
    case Mechanism::NAI: return "NAI";
  }
  return "";
}

std::string_view to_label(Consent c) { return c == Consent::OptOut ? "OptOut" : "OptIn"; }

std::optional<Regime> regime_from_label(std::string_view s) {
  if (s == "GDPR") return Regime::GDPR;
  if (s == "CCPA") return Regime::CCPA;
  return std::nullopt;
}

std::optional<Mechanism> mechanism_from_label(std::string_view s) {
  if (s == "OneTrust") return Mechanism::OneTrust;
  if (s == "CookieBot") return Mechanism::CookieBot;
  if (s == "NAI") return Mechanism::NAI;
  return std::nullopt;
}

std::optional<Consent> consent_from_label(std::string_view s) {
  if (s == "OptOut") return Consent::OptOut;
  if (s == "OptIn") return Consent::OptIn;
  return std::nullopt;
}

std::optional<Persona> Persona::from_label(std::string_view s) {
  for (size_t i = 0; i < kCount; ++i) {
    if (kPersonaLabels[i] == s) return Persona(i);
  }
  return std::nullopt;
}

std::string_view Persona::label() const { return kPersonaLabels[idx_]; }

const std::array<Persona, Persona::kCount>& Persona::all() {
  static const std::array<Persona, kCount> values = [] {
    std::array<Persona, kCount> a;
    for (size_t i = 0; i < kCount; ++i) a[i] = Persona(i);
    return a;
  }();
  return values;
}

std::vector<Persona> Persona::categories() {
  std::vector<Persona> v;
  v.reserve(kCategoryCount);
  for (size_t i = 0; i < kCategoryCount; ++i) v.push_back(Persona(i));
  return v;
}

}  // namespace caudit
