#pragma once

// JSON shapes of the domain and view types, shared by the event log and
// the HTTP API.

#include <json.hpp>

#include "emaint/automaton.hpp"
#include "emaint/context_sa.hpp"
#include "emaint/diagnostic.hpp"
#include "emaint/maintenance_model.hpp"
#include "emaint/session_service.hpp"
#include "emaint/user_model.hpp"

namespace emaint {

/// `{"none": p0, "basic": p1, "advanced": p2, "expert": p3}`
Json posterior_json(const Distribution& d);
Distribution posterior_from_json(const Json& j);

Json to_json(const Diagnostic& d);
Json to_json(const Alert& a);
Alert alert_from_json(const Json& j);
Json to_json(const EnabledAction& a);
Json to_json(const ContentComponent& c);
Json to_json(const std::vector<ContentComponent>& cs);
Json to_json(const TeamEvent& e);
Json to_json(const TeamView& v, bool detail);
Json to_json(const SectionView& v);
Json to_json(const StepView& v);
Json to_json(const HelpResult& h);
Json to_json(const UserView& u);
Json to_json(const ModelInfo& m);
Json to_json(const SignalFrame& f);

}  // namespace emaint
