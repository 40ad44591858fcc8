//*****************************************************************************
// Copyright 2026 The ALEX Authors
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
//*****************************************************************************
#include <gtest/gtest.h>

#include <chrono>
#include <set>
#include <thread>

#include "alex/mock_client.hpp"
#include "alex/openai_client.hpp"
#include "alex/synthetic.hpp"
#include "alex/verifier.hpp"
#include "test_util.hpp"

using namespace alex;

namespace {

PromptTemplate sample_template()
{
    PromptTemplate t;
    t.instructions = "Check the label.";
    t.labeling_rules = "- self_report: own diagnosis";
    t.fewshot = {{"first example post", 1, true, "Own test."}, {"second example post", 1, false, "Step 1: sister."}};
    return t;
}

std::vector<VerifierRequest> requests(std::size_t n, const TaskSpec& task)
{
    const auto tpl = sample_template();
    std::vector<VerifierRequest> out;
    for (std::size_t i = 0; i < n; ++i)
        out.push_back(make_request(tpl, task, "id" + std::to_string(i), "post number " + std::to_string(i),
                                   static_cast<int>(i % 2)));
    return out;
}

/// Sleeps longer for early requests so completions arrive out of order.
class SlowClient final : public LLMClient {
public:
    std::string complete(const VerifierRequest& r) override
    {
        const int idx = std::stoi(r.example_id.substr(2));
        int now = ++in_flight_;
        int seen = peak_.load();
        while (now > seen && !peak_.compare_exchange_weak(seen, now)) {
        }
        std::this_thread::sleep_for(std::chrono::milliseconds(2 * (20 - idx % 20)));
        --in_flight_;
        return idx % 3 == 0 ? "False. Step 1: no." : "True. yes";
    }
    std::string identifier() const override { return "slow"; }
    std::atomic<int> in_flight_{0};
    std::atomic<int> peak_{0};
};

class AlwaysThrows final : public LLMClient {
public:
    std::string complete(const VerifierRequest&) override { throw std::runtime_error("HTTP 503"); }
    std::string identifier() const override { return "down"; }
};

} // namespace

TEST(BuildPrompt, SectionOrderAndExamplesBeforeQuery)
{
    const auto task = synthetic::binary_task();
    const auto p = build_prompt(sample_template(), "I tested positive today", 1, task);
    const auto instr = p.find("Check the label.");
    const auto rules = p.find("- self_report: own diagnosis");
    const auto ex1 = p.find("first example post");
    const auto ex2 = p.find("second example post");
    const auto query = p.find("I tested positive today");
    ASSERT_NE(query, std::string::npos);
    EXPECT_LT(instr, rules);
    EXPECT_LT(rules, ex1);
    EXPECT_LT(ex1, ex2);
    EXPECT_LT(ex2, query);
    EXPECT_EQ(p.find("I tested positive today", query + 1), std::string::npos);
    EXPECT_NE(p.find("Predicted label: self_report\nAnswer:"), std::string::npos);
    EXPECT_NE(p.find("Answer: False. Step 1: sister."), std::string::npos);
}

TEST(BuildPrompt, EmptyFewshotOmitsSection)
{
    auto tpl = sample_template();
    tpl.fewshot.clear();
    const auto p = build_prompt(tpl, "x", 0, synthetic::binary_task());
    EXPECT_EQ(p.find("Examples"), std::string::npos);
    EXPECT_EQ(p, "Check the label.\n\nLabeling rules:\n- self_report: own diagnosis\n\nPost: x\nPredicted label: "
                 "not_self_report\nAnswer:");
}

TEST(BuildPrompt, SlotTextInPostIsLiteral)
{
    const auto p = build_prompt(sample_template(), "my {label} and {text} and {rules}", 1, synthetic::binary_task());
    EXPECT_NE(p.find("Post: my {label} and {text} and {rules}\n"), std::string::npos);
}

TEST(BuildPrompt, LabelOutOfTask)
{
    EXPECT_ALEX_ERROR(build_prompt(sample_template(), "x", 7, synthetic::binary_task()), LabelOutOfTask);
    auto tpl = sample_template();
    tpl.fewshot[0].label = 9;
    EXPECT_ALEX_ERROR(build_prompt(tpl, "x", 1, synthetic::binary_task()), LabelOutOfTask);
}

TEST(BuildPrompt, InjectiveOverTextAndLabel)
{
    const auto task = synthetic::binary_task();
    const auto tpl = sample_template();
    std::set<std::string> seen;
    std::size_t n = 0;
    for (const std::string text : {"a", "b", "a ", " a", "ab", "a\nb", "{label}", "self_report", ""})
        for (int label : {0, 1}) {
            ++n;
            seen.insert(build_prompt(tpl, text, label, task));
        }
    EXPECT_EQ(seen.size(), n);
}

TEST(Template, ValidationRules)
{
    PromptTemplate t;
    t.layout = "{text}";
    EXPECT_ALEX_ERROR(t.validate(), ConfigError);
    t.layout = "{text} {label} {text}";
    EXPECT_ALEX_ERROR(t.validate(), ConfigError);
    t.layout = "{rules} {instructions} {text} {label}";
    EXPECT_ALEX_ERROR(t.validate(), ConfigError);
    t.layout = "{instructions} {rules} {rules} {text} {label}";
    EXPECT_ALEX_ERROR(t.validate(), ConfigError);
    t.layout = std::string(kDefaultLayout);
    EXPECT_NO_THROW(t.validate());
}

TEST(Template, ParsesSectionedFile)
{
    const auto t = parse_template("provenance note\n[instructions]\nDo it.\n\n[rules]\n- a\n- b\n"
                                  "[example]\ntext: hello: world\nlabel: 1\nverdict: False\n"
                                  "explanation: Step 1: x.\nStep 2: y.\n"
                                  "[layout]\n{instructions}|{rules}|{examples}|{text}|{label}\n");
    EXPECT_EQ(t.instructions, "Do it.");
    EXPECT_EQ(t.labeling_rules, "- a\n- b");
    ASSERT_EQ(t.fewshot.size(), 1u);
    EXPECT_EQ(t.fewshot[0].text, "hello: world");
    EXPECT_EQ(t.fewshot[0].label, 1);
    EXPECT_FALSE(t.fewshot[0].supported);
    EXPECT_EQ(t.fewshot[0].explanation, "Step 1: x.\nStep 2: y.");
    EXPECT_EQ(t.layout, "{instructions}|{rules}|{examples}|{text}|{label}");
    EXPECT_ALEX_ERROR(parse_template("[example]\ntext: a\nverdict: maybe\n"), MalformedRecord);
    EXPECT_ALEX_ERROR(parse_template("[example]\nlabel: 1\n"), MalformedRecord);
}

TEST(Template, BundledStartersLoadAndRender)
{
    for (const auto& [tpl_name, task_name] : std::vector<std::pair<std::string, std::string>>{
             {"task1.txt", "task1.json"}, {"task2.txt", "task2.json"}, {"task4.txt", "task4.json"}}) {
        const auto tpl = load_template(test::repo_path("templates/" + tpl_name));
        const auto task = load_task(test::repo_path("tasks/" + task_name));
        EXPECT_FALSE(tpl.instructions.empty());
        EXPECT_EQ(tpl.fewshot.size(), 2u);
        const auto p = build_prompt(tpl, "QUERY POST", *task.verify_scope.begin(), task);
        EXPECT_NE(p.find("QUERY POST"), std::string::npos);
        EXPECT_EQ(p.find("RECONSTRUCTED"), std::string::npos);
    }
}

TEST(Template, HashTracksContent)
{
    auto a = sample_template();
    auto b = a;
    EXPECT_EQ(a.hash(), b.hash());
    b.fewshot[1].supported = true;
    EXPECT_NE(a.hash(), b.hash());
    b = a;
    b.layout += " ";
    EXPECT_NE(a.hash(), b.hash());
}

TEST(ParseVerdict, SpecExamples)
{
    auto v = parse_verdict("True. The user explicitly reports a positive test.", "a");
    EXPECT_EQ(v.supported, Support::supported);
    EXPECT_EQ(v.explanation, "The user explicitly reports a positive test.");
    v = parse_verdict("False. Step 1: the post describes a relative... Step 2: ...", "b");
    EXPECT_EQ(v.supported, Support::refuted);
    EXPECT_EQ(v.explanation, "Step 1: the post describes a relative... Step 2: ...");
    v = parse_verdict("I'm not sure about this one", "c");
    EXPECT_EQ(v.supported, Support::inconclusive);
    EXPECT_EQ(v.explanation, "I'm not sure about this one");
    EXPECT_EQ(v.example_id, "c");
}

TEST(ParseVerdict, FixtureFile)
{
    std::size_t n = 0;
    for_each_jsonl<json>(test::data_path("verdict_responses.jsonl"), [&](std::size_t, const json& j) {
        ++n;
        const auto raw = j["raw"].get<std::string>();
        Verdict v;
        ASSERT_NO_THROW(v = parse_verdict(raw, j["id"].get<std::string>()));
        EXPECT_EQ(to_string(v.supported), j["expected"].get<std::string>()) << raw;
        if (j.contains("explanation")) {
            EXPECT_EQ(v.explanation, j["explanation"].get<std::string>()) << raw;
        }
        if (v.supported != Support::inconclusive) {
            EXPECT_FALSE(v.explanation.empty());
        }
        EXPECT_EQ(v.raw_response, raw);
    });
    EXPECT_EQ(n, 20u);
}

TEST(ParseVerdict, TotalOverRandomBytes)
{
    Rng rng(8);
    for (int t = 0; t < 5000; ++t) {
        std::string raw(rng.below(64), '\0');
        for (auto& c : raw)
            c = static_cast<char>(rng.below(256));
        if (t % 3 == 0)
            raw = (t % 2 ? "TRUE" : "false") + raw;
        Verdict v;
        ASSERT_NO_THROW(v = parse_verdict(raw, "x"));
        if (v.supported != Support::inconclusive) {
            EXPECT_FALSE(v.explanation.empty());
        }
        EXPECT_NO_THROW(dump_line(to_json(v)));
    }
}

TEST(Verdicts, FileRoundTrip)
{
    test::TempDir dir;
    std::vector<Verdict> vs{parse_verdict("True. ok", "a"), parse_verdict("False. Step 1", "b"), parse_verdict("?", "c")};
    vs[1].attempts = 2;
    write_file(dir / "v.jsonl", verdicts_to_jsonl(vs));
    const auto back = load_verdicts(dir / "v.jsonl");
    EXPECT_EQ(verdicts_to_jsonl(back), verdicts_to_jsonl(vs));
    const auto first = ordered_json::parse(verdicts_to_jsonl(vs).substr(0, verdicts_to_jsonl(vs).find('\n')));
    EXPECT_EQ(first.dump(), R"({"id":"a","supported":"true","explanation":"ok","attempts":0})");
    write_file(dir / "bad.jsonl", R"({"id":"a","supported":"yes"})");
    EXPECT_ALEX_ERROR(load_verdicts(dir / "bad.jsonl"), MalformedRecord);
}

TEST(VerifyBatch, OrderMatchesInputUnderParallelism)
{
    const auto reqs = requests(40, synthetic::binary_task());
    SlowClient client;
    const auto out = verify_batch(reqs, client, 8);
    ASSERT_EQ(out.size(), reqs.size());
    for (std::size_t i = 0; i < out.size(); ++i) {
        EXPECT_EQ(out[i].example_id, reqs[i].example_id);
        EXPECT_EQ(out[i].supported, i % 3 == 0 ? Support::refuted : Support::supported);
        EXPECT_EQ(out[i].attempts, 1);
    }
    EXPECT_LE(client.peak_.load(), 8);
    EXPECT_GT(client.peak_.load(), 1);
}

TEST(VerifyBatch, TenRequestsAgainstKeywordMock)
{
    const auto reqs = requests(10, synthetic::binary_task());
    KeywordMockClient client({{1, {"number 1", "number 3"}}, {0, {"post"}}});
    const auto out = verify_batch(reqs, client, 4);
    ASSERT_EQ(out.size(), 10u);
    for (std::size_t i = 0; i < 10; ++i) {
        EXPECT_EQ(out[i].example_id, reqs[i].example_id);
        const bool expect_true = reqs[i].predicted_label == 0 || i == 1 || i == 3;
        EXPECT_EQ(out[i].supported, expect_true ? Support::supported : Support::refuted) << i;
    }
}

TEST(VerifyBatch, RetriesThenSucceeds)
{
    const auto reqs = requests(5, synthetic::binary_task());
    KeywordMockClient inner({});
    FaultInjectingClient client(inner, 2);
    const auto out = verify_batch(reqs, client, 2, RetryPolicy{3, std::chrono::milliseconds(1), 2.0});
    for (std::size_t i = 0; i < out.size(); ++i) {
        EXPECT_EQ(out[i].attempts, 3);
        EXPECT_EQ(out[i].supported, Support::refuted);
        EXPECT_EQ(client.calls_for(reqs[i].example_id), 3);
    }
}

TEST(VerifyBatch, ExhaustedRetriesAreInconclusive)
{
    const auto reqs = requests(3, synthetic::binary_task());
    KeywordMockClient inner({});
    FaultInjectingClient client(inner, 3);
    const auto out = verify_batch(reqs, client, 1, RetryPolicy{3, {}, 2.0});
    for (const auto& v : out) {
        EXPECT_EQ(v.supported, Support::inconclusive);
        EXPECT_EQ(v.attempts, 3);
    }
    AlwaysThrows down;
    const auto d = verify_batch(reqs, down, 3);
    EXPECT_EQ(d[0].supported, Support::inconclusive);
    EXPECT_NE(d[0].explanation.find("HTTP 503"), std::string::npos);
}

TEST(VerifyBatch, ConfigErrors)
{
    KeywordMockClient client({});
    EXPECT_ALEX_ERROR(verify_batch({}, client, 0), ConfigError);
    EXPECT_ALEX_ERROR(verify_batch({}, client, 1, RetryPolicy{0, {}, 2.0}), ConfigError);
    EXPECT_TRUE(verify_batch({}, client, 4).empty());
}

TEST(VerifyBatch, SerialRunsAreBitIdentical)
{
    const auto reqs = requests(30, synthetic::binary_task());
    std::unordered_map<std::string, int> gold;
    for (std::size_t i = 0; i < reqs.size(); ++i)
        gold[reqs[i].example_id] = static_cast<int>((i / 2) % 2);
    OracleMockClient a(gold, 0.7, 3), b(gold, 0.7, 3);
    EXPECT_EQ(verdicts_to_jsonl(verify_batch(reqs, a, 1)), verdicts_to_jsonl(verify_batch(reqs, b, 1)));
    OracleMockClient c(gold, 0.7, 3);
    EXPECT_EQ(verdicts_to_jsonl(verify_batch(reqs, c, 8)), verdicts_to_jsonl(verify_batch(reqs, a, 1)));
}

TEST(OracleMock, PerfectAccuracySupportsIffCorrect)
{
    const auto task = synthetic::binary_task();
    const auto reqs = requests(50, task);
    std::unordered_map<std::string, int> gold;
    Rng rng(4);
    for (const auto& r : reqs)
        gold[r.example_id] = static_cast<int>(rng.below(2));
    OracleMockClient client(gold, 1.0, 9);
    const auto out = verify_batch(reqs, client, 4);
    for (std::size_t i = 0; i < reqs.size(); ++i)
        EXPECT_EQ(out[i].supported == Support::supported, reqs[i].predicted_label == gold[reqs[i].example_id]);
    auto unknown = reqs[0];
    unknown.example_id = "nobody";
    EXPECT_EQ(parse_verdict(client.complete(unknown), "nobody").supported, Support::inconclusive);
}

TEST(OracleMock, AccuracyControlsErrorRate)
{
    std::unordered_map<std::string, int> gold;
    std::vector<VerifierRequest> reqs;
    for (int i = 0; i < 4000; ++i) {
        const auto id = "e" + std::to_string(i);
        gold[id] = i % 2;
        reqs.push_back({id, "t", i % 2, "p", "h"});
    }
    OracleMockClient client(gold, 0.8, 1);
    client.set_class_accuracy(0, 0.5);
    const auto out = verify_batch(reqs, client, 4);
    double right1 = 0, right0 = 0;
    for (std::size_t i = 0; i < out.size(); ++i)
        (i % 2 ? right1 : right0) += out[i].supported == Support::supported;
    EXPECT_NEAR(right1 / 2000, 0.8, 0.03);
    EXPECT_NEAR(right0 / 2000, 0.5, 0.04);
}

TEST(VerdictCache, HitsSkipClientAndPersist)
{
    test::TempDir dir;
    const auto reqs = requests(6, synthetic::binary_task());
    KeywordMockClient inner({{1, {"number"}}});
    FaultInjectingClient flaky(inner, 1);
    std::string first;
    {
        VerdictCache cache(dir / "cache.jsonl");
        first = verdicts_to_jsonl(verify_batch(reqs, flaky, 3, {}, &cache));
        EXPECT_EQ(cache.size(), 6u);
    }
    KeywordMockClient fresh({});
    VerdictCache warm(dir / "cache.jsonl");
    EXPECT_EQ(warm.size(), 6u);
    EXPECT_EQ(verdicts_to_jsonl(verify_batch(reqs, fresh, 3, {}, &warm)), first);
    EXPECT_EQ(fresh.calls(), 0u);
}

TEST(VerdictCache, KeyedByTemplateTextAndLabel)
{
    const auto task = synthetic::binary_task();
    const auto tpl = sample_template();
    auto other = tpl;
    other.instructions += "!";
    const auto a = make_request(tpl, task, "x", "text", 1);
    EXPECT_EQ(VerdictCache::key(a), VerdictCache::key(make_request(tpl, task, "y", "text", 1)));
    EXPECT_NE(VerdictCache::key(a), VerdictCache::key(make_request(tpl, task, "x", "text", 0)));
    EXPECT_NE(VerdictCache::key(a), VerdictCache::key(make_request(tpl, task, "x", "text2", 1)));
    EXPECT_NE(VerdictCache::key(a), VerdictCache::key(make_request(other, task, "x", "text", 1)));
}

TEST(VerdictCache, SkipsTornLine)
{
    test::TempDir dir;
    const auto reqs = requests(2, synthetic::binary_task());
    write_file(dir / "c.jsonl", dump_line(ordered_json{{"key", VerdictCache::key(reqs[0])}, {"response", "True. x"},
                                                       {"attempts", 1}}) +
                                    "\n{\"key\":\"ab");
    VerdictCache cache(dir / "c.jsonl");
    EXPECT_EQ(cache.size(), 1u);
}

TEST(VerdictCache, ConcurrentInsertsAreSafe)
{
    test::TempDir dir;
    const auto reqs = requests(200, synthetic::binary_task());
    KeywordMockClient client({{0, {"post"}}});
    VerdictCache cache(dir / "c.jsonl");
    verify_batch(reqs, client, 16, {}, &cache);
    VerdictCache reread(dir / "c.jsonl");
    EXPECT_EQ(reread.size(), 200u);
}

TEST(ChatClient, RequiresKeyFromEnvironment)
{
    ::unsetenv(kApiKeyEnv);
    EXPECT_ALEX_ERROR(ChatCompletionsClient(ChatClientConfig{}), ClientFailure);
}

TEST(ChatClient, TalksToCompatibleEndpointWithoutLeakingKey)
{
    httplib::Server server;
    std::string seen_auth, seen_body;
    int status = 200;
    server.Post("/v1/chat/completions", [&](const httplib::Request& req, httplib::Response& res) {
        seen_auth = req.get_header_value("Authorization");
        seen_body = req.body;
        res.status = status;
        res.set_content(R"({"choices":[{"message":{"role":"assistant","content":"False. Step 1: sister."}}]})",
                        "application/json");
    });
    const int port = server.bind_to_any_port("127.0.0.1");
    std::thread t([&] { server.listen_after_bind(); });
    server.wait_until_ready();

    ::setenv(kApiKeyEnv, "sk-test-secret", 1);
    ChatClientConfig cfg;
    cfg.endpoint = "http://127.0.0.1:" + std::to_string(port);
    ChatCompletionsClient client(cfg);
    const auto req = make_request(sample_template(), synthetic::binary_task(), "a", "my sister tested positive", 1);
    const auto out = verify_batch({req}, client, 1);
    EXPECT_EQ(out[0].supported, Support::refuted);
    EXPECT_EQ(seen_auth, "Bearer sk-test-secret");
    const auto body = json::parse(seen_body);
    EXPECT_EQ(body["model"], "gpt-3.5-turbo");
    EXPECT_EQ(body["temperature"], 0.0);
    EXPECT_EQ(body["messages"][0]["content"], req.rendered_prompt);

    status = 401;
    try {
        client.complete(req);
        ADD_FAILURE();
    } catch (const Error& e) {
        EXPECT_EQ(e.kind(), ErrorKind::ClientFailure);
        EXPECT_EQ(std::string(e.what()).find("sk-test-secret"), std::string::npos);
    }
    ::unsetenv(kApiKeyEnv);
    server.stop();
    t.join();
}
