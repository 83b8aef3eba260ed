#include <gtest/gtest.h>

#include "emaint/context_sa.hpp"

using namespace emaint;

namespace {

ContextRule rule(std::string id, std::string when, AlertSeverity sev, std::vector<std::string> scope = {}) {
    return ContextRule{std::move(id), std::move(scope), parse_predicate(when), sev, "msg " + when};
}

SignalFrame frame(std::initializer_list<std::pair<const char*, double>> values) {
    SignalFrame f;
    for (auto [k, v] : values) f[k] = SignalSample{v, 1000};
    return f;
}

TeamEvent ev(std::string sid, std::string leaf, TeamEventKind kind, std::int64_t t, std::string member = "m1") {
    TeamEvent e;
    e.team_id = "crew";
    e.member_id = std::move(member);
    e.session_id = std::move(sid);
    e.leaf_id = std::move(leaf);
    e.kind = kind;
    e.timestamp = t;
    return e;
}

}  // namespace

TEST(Predicate, ParseAndFormat) {
    auto p = parse_predicate("elapsed > 300 and temp >= 60.5 and surprisal != 2");
    ASSERT_EQ(p.terms.size(), 3u);
    EXPECT_EQ(p.terms[0].operand, Comparison::Operand::Elapsed);
    EXPECT_EQ(p.terms[1].signal, "temp");
    EXPECT_EQ(p.terms[1].op, CompareOp::GreaterEqual);
    EXPECT_EQ(p.terms[2].operand, Comparison::Operand::Surprisal);
    EXPECT_EQ(parse_predicate(format_predicate(p)), p);
    EXPECT_EQ(referenced_signals(p), std::vector<std::string>{"temp"});
}

TEST(Predicate, RejectsMalformed) {
    EXPECT_THROW(parse_predicate("temp >"), PredicateError);
    EXPECT_THROW(parse_predicate("temp > 5 or x < 2"), PredicateError);
    EXPECT_THROW(parse_predicate(""), PredicateError);
    EXPECT_THROW(parse_predicate("temp > abc"), PredicateError);
}

TEST(Contexts, StrictThreshold) {
    std::vector<ContextRule> rules{rule("hot", "temp > 80", AlertSeverity::Danger, {"a"})};
    std::vector<std::string> cur{"a"};
    auto r = evaluate_contexts(rules, cur, frame({{"temp", 85}}), 0, 0, 7);
    ASSERT_EQ(r.alerts.size(), 1u);
    EXPECT_EQ(r.alerts[0].severity, AlertSeverity::Danger);
    EXPECT_EQ(r.alerts[0].leaf_id, "a");
    EXPECT_EQ(r.alerts[0].timestamp, 7);
    EXPECT_TRUE(evaluate_contexts(rules, cur, frame({{"temp", 80}}), 0, 0).alerts.empty());
}

TEST(Contexts, ScopeLimitsRules) {
    std::vector<ContextRule> rules{rule("hot", "temp > 80", AlertSeverity::Danger, {"a"}),
                                   rule("any", "temp > 10", AlertSeverity::Info)};
    std::vector<std::string> cur{"b"};
    auto r = evaluate_contexts(rules, cur, frame({{"temp", 85}}), 0, 0);
    ASSERT_EQ(r.alerts.size(), 1u);
    EXPECT_EQ(r.alerts[0].rule_id, "any");
    EXPECT_EQ(r.alerts[0].leaf_id, "b");
}

TEST(Contexts, ConjunctionTruthTable) {
    std::vector<ContextRule> rules{rule("both", "elapsed > 300 and temp > 60", AlertSeverity::Warning)};
    std::vector<std::string> cur;
    for (double elapsed : {400.0, 200.0})
        for (double temp : {70.0, 50.0}) {
            auto r = evaluate_contexts(rules, cur, frame({{"temp", temp}}), elapsed, 0);
            bool want = elapsed > 300 && temp > 60;
            EXPECT_EQ(r.alerts.size(), want ? 1u : 0u) << elapsed << " " << temp;
        }
}

TEST(Contexts, MissingSignalIsReported) {
    std::vector<ContextRule> rules{rule("hot", "temp > 80", AlertSeverity::Danger)};
    std::vector<std::string> cur;
    auto r = evaluate_contexts(rules, cur, frame({{"other", 1}}), 0, 0);
    EXPECT_TRUE(r.alerts.empty());
    ASSERT_EQ(r.problems.size(), 1u);
    EXPECT_EQ(r.problems[0].code, "UnknownSignal");
    EXPECT_EQ(r.problems[0].path, "contexts.hot");
}

TEST(Contexts, OrderedByRuleIdAndPure) {
    std::vector<ContextRule> rules{rule("zeta", "surprisal > 1", AlertSeverity::Info),
                                   rule("alpha", "surprisal > 1", AlertSeverity::Info)};
    std::vector<std::string> cur;
    auto a = evaluate_contexts(rules, cur, {}, 0, 2);
    ASSERT_EQ(a.alerts.size(), 2u);
    EXPECT_EQ(a.alerts[0].rule_id, "alpha");
    EXPECT_EQ(evaluate_contexts(rules, cur, {}, 0, 2).alerts, a.alerts);
    for (const auto& al : a.alerts) EXPECT_TRUE(holds(rules[al.rule_id == "alpha"].predicate, {}, 0, 2));
}

TEST(Team, UnblockedOnlyDirect) {
    DependencyMap deps{{"a", {"b", "x"}}, {"b", {"c"}}};
    auto out = notify_unblocked(ev("s1", "a", TeamEventKind::Completed, 5), deps);
    ASSERT_EQ(out.size(), 2u);
    EXPECT_EQ(out[0].leaf_id, "b");
    EXPECT_EQ(out[1].leaf_id, "x");
    EXPECT_EQ(out[0].cause_leaf, "a");
    EXPECT_EQ(out[0].kind, TeamEventKind::Unblocked);
    EXPECT_TRUE(notify_unblocked(ev("s1", "c", TeamEventKind::Completed, 5), deps).empty());
}

TEST(Team, FeedOrderAndGuards) {
    TeamFeed feed;
    feed.register_session("s1", "crew", "m1");
    std::vector<TeamEvent> seen;
    auto token = feed.subscribe([&](const TeamEvent& e) { seen.push_back(e); });
    feed.record(ev("s1", "a", TeamEventKind::Started, 1));
    feed.record(ev("s1", "a", TeamEventKind::Completed, 2));
    try {
        feed.record(ev("s1", "a", TeamEventKind::Completed, 3));
        FAIL();
    } catch (const TeamError& e) {
        EXPECT_EQ(e.kind(), TeamErrorKind::AlreadyCompleted);
    }
    try {
        feed.record(ev("nope", "a", TeamEventKind::Started, 3));
        FAIL();
    } catch (const TeamError& e) {
        EXPECT_EQ(e.kind(), TeamErrorKind::UnknownSession);
    }
    feed.unsubscribe(token);
    feed.record(ev("s1", "b", TeamEventKind::Started, 4));
    EXPECT_EQ(seen.size(), 2u);
    auto all = feed.events();
    ASSERT_EQ(all.size(), 3u);
    EXPECT_EQ(all[0].timestamp, 1);
    EXPECT_EQ(all[2].leaf_id, "b");
}

TEST(Team, SummaryLinesAndIdle) {
    TeamFeed feed;
    feed.register_session("s1", "crew", "ana");
    feed.register_session("s2", "crew", "bo");
    feed.register_session("s3", "crew", "cy");
    feed.record(ev("s1", "a", TeamEventKind::Started, 1, "ana"));
    feed.record(ev("s2", "b", TeamEventKind::Started, 2, "bo"));
    feed.mark_finished("s3");
    auto describe_leaf = [](const std::string&, const std::string& leaf) { return "do " + leaf; };
    auto v = feed.summary("crew", describe_leaf);
    ASSERT_EQ(v.members.size(), 3u);
    EXPECT_EQ(v.members[0].line, "ana: a - do a");
    EXPECT_EQ(v.members[1].line, "bo: b - do b");
    EXPECT_EQ(v.members[2].line, "cy: idle");
    EXPECT_EQ(v.compact(), "team crew: 3 members, 2 active, 1 idle\nana: a - do a\nbo: b - do b\ncy: idle\n");
    EXPECT_THROW(feed.summary("other", describe_leaf), TeamError);
}

TEST(Team, DetailKeepsLastK) {
    TeamFeed feed;
    feed.register_session("s1", "crew", "m1");
    for (int i = 0; i < 14; ++i) feed.record(ev("s1", "l" + std::to_string(i), TeamEventKind::Started, i));
    auto v = feed.summary("crew", nullptr);
    ASSERT_EQ(v.members[0].recent.size(), 10u);
    EXPECT_EQ(v.members[0].recent.front().leaf_id, "l4");
    EXPECT_EQ(feed.summary("crew", nullptr, 3).members[0].recent.size(), 3u);

    // The same log and registry always give the same text.
    auto log = feed.events();
    std::map<std::string, TeamMembership> reg{{"s1", {"crew", "m1", false}}};
    EXPECT_EQ(summarize_team("crew", log, reg, nullptr, 10).detail(), v.detail());
}

TEST(Team, TagsInDescription) {
    auto e = ev("s1", "a", TeamEventKind::Blocked, 9);
    e.tag = SaBreakdownTag{TsaLevel::Tsa2_Miscomprehended, "wrong valve"};
    EXPECT_NE(describe(e).find("wrong valve"), std::string::npos);
    EXPECT_EQ(parse_tsa_level(to_string(TsaLevel::Tsa3_ImplicationsMissed)), TsaLevel::Tsa3_ImplicationsMissed);
    EXPECT_EQ(parse_team_event_kind("unblocked"), TeamEventKind::Unblocked);
}
