// Copyright 2026 The Forge Authors
// SPDX-License-Identifier: Apache-2.0
//

#include <gtest/gtest.h>

#include <random>

#include "support.hpp"

namespace forge {
namespace {

using testing::gateway_with;

DetailedCaption street() { return {"v", {{5, "a red car passes"}, {30, "a dog sits"}}}; }

QARecord passed(std::string question, std::string answer) {
  QARecord qa;
  qa.id = make_qa_id("v", QuestionType::Counting, question, answer);
  qa.video_id = "v";
  qa.question = std::move(question);
  qa.answer = std::move(answer);
  qa.verdicts.f1.verdict = qa.verdicts.f2.verdict = qa.verdicts.f3.verdict = Verdict::Pass;
  qa.verdicts.passed_all = true;
  return qa;
}

std::optional<std::string> equality_judge(const ChatRequest& req) {
  const auto& p = req.messages.back().content;
  auto model = testing::sim::between(p, "\nModel Answer: ", "\nStandard Answer: ");
  auto gt = testing::sim::between(p, "\nStandard Answer: ", "\nYour output:");
  return testing::sim::normalize(model) == testing::sim::normalize(gt) ? "1" : "0";
}

TEST(QuestionTypes, WireAndDisplayNames) {
  EXPECT_EQ(parse_question_type("Cause and Effect"), QuestionType::CauseAndEffect);
  EXPECT_EQ(parse_question_type("CauseAndEffect"), QuestionType::CauseAndEffect);
  EXPECT_EQ(parse_question_type("Reading (OCR)"), QuestionType::Reading);
  EXPECT_FALSE(parse_question_type("Trivia"));
  EXPECT_EQ(kQuestionTypes.size(), 10u);
  for (const auto& info : kQuestionTypes) EXPECT_EQ(parse_question_type(info.name), info.type);
}

TEST(Generation, QuotaAndDuplicates) {
  auto quota = uniform_quota(1);
  auto out = parse_generated_qa(R"x(```json
[{"type":"Counting","question":"How many cars?","answer":"one"},
 {"type":"Counting","question":"How many dogs?","answer":"one"},
 {"type":"Reading (OCR)","question":"What does the sign say?","answer":"STOP"},
 {"type":"Reading","question":"What does the sign say?","answer":"STOP"}]
```)x",
                                "v", quota);
  ASSERT_EQ(out.size(), 2u);
  EXPECT_EQ(out[0].question, "How many cars?");
  EXPECT_EQ(out[1].qtype, QuestionType::Reading);
  EXPECT_EQ(out[0].id, make_qa_id("v", QuestionType::Counting, "How many cars?", "one"));
  EXPECT_EQ(out[0].id.substr(out[0].id.size() - 3), "-oe");
  EXPECT_TRUE(parse_generated_qa(R"([{"type":"Counting","question":"q","answer":"a"}])", "v", uniform_quota(0)).empty());
}

TEST(Generation, Errors) {
  auto q = uniform_quota(2);
  auto code = [&](const char* text) {
    try {
      parse_generated_qa(text, "v", q);
    } catch (const Error& e) {
      return e.code();
    }
    return ErrorCode::Io;
  };
  EXPECT_EQ(code("not json"), ErrorCode::GenerationUnparseable);
  EXPECT_EQ(code(R"({"type":"Counting"})"), ErrorCode::GenerationUnparseable);
  EXPECT_EQ(code(R"([{"type":"Counting","question":"q"}])"), ErrorCode::GenerationUnparseable);
  EXPECT_EQ(code(R"([{"type":"Gossip","question":"q","answer":"a"}])"), ErrorCode::UnknownQuestionType);
  EXPECT_EQ(code(R"([{"type":"Counting","question":" ","answer":"a"}])"), ErrorCode::GenerationUnparseable);
}

TEST(Summary, MustBeShorterAndNonEmpty) {
  auto b = std::make_shared<ScriptedBackend>();
  std::string reply = "Cars and dogs.";
  b->set_responder([&](const ChatRequest&) { return std::optional<std::string>(reply); });
  auto gw = gateway_with(b);
  EXPECT_EQ(summarize(*gw, street()).text, "Cars and dogs.");
  reply = "   ";
  try {
    summarize(*gw, street());
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::EmptySummary);
  }
  reply = serialize_caption(street()) + " and more";
  try {
    summarize(*gw, street());
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::SummaryNotShorter);
  }
}

TEST(Verifier, ParsesPrefixAndReasksOnce) {
  EXPECT_EQ(parse_verifier("TRUE."), true);
  EXPECT_EQ(parse_verifier(" false, because"), false);
  EXPECT_FALSE(parse_verifier("It is true"));

  auto b = std::make_shared<ScriptedBackend>();
  int calls = 0;
  b->set_responder([&](const ChatRequest& req) -> std::optional<std::string> {
    ++calls;
    return req.messages.back().content.find(prompts::kVerifyReminder) != std::string::npos ? "True" : "Hmm";
  });
  auto gw = gateway_with(b);
  auto qa = passed("How many cars?", "one");
  EXPECT_EQ(verify_answer(*gw, qa, street()), Verdict::Pass);
  EXPECT_EQ(calls, 2);

  b->set_responder([](const ChatRequest&) { return std::optional<std::string>("Hmm"); });
  try {
    verify_answer(*gw, qa, street());
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::VerifierUnparseable);
  }
}

TEST(BiasFilter, StrictThreshold) {
  auto b = std::make_shared<ScriptedBackend>();
  b->set_responder([](const ChatRequest& req) -> std::optional<std::string> {
    if (req.role.kind == RoleKind::Probe) return req.role.probe_index == 0 ? "one" : "two";
    return equality_judge(req);
  });
  auto gw = gateway_with(b);
  auto qa = passed("How many cars?", "one");
  auto half = bias_filter(*gw, qa, std::nullopt, 0.5);
  EXPECT_EQ(half.verdict, Verdict::Fail);  // mean 0.5 is not below 0.5
  EXPECT_EQ(half.probe_hits, (std::vector<int>{1, 0}));
  EXPECT_EQ(bias_filter(*gw, qa, std::nullopt, 1.0).verdict, Verdict::Pass);
  EXPECT_EQ(bias_filter(*gw, qa, std::nullopt, 0.51, 2).verdict, Verdict::Pass);
  EXPECT_THROW(bias_filter(*gw, qa, std::nullopt, 0.0), Error);
}

TEST(BiasFilter, SummaryPrecedesQuestion) {
  auto b = std::make_shared<ScriptedBackend>();
  std::vector<std::size_t> turns;
  b->set_responder([&](const ChatRequest& req) -> std::optional<std::string> {
    if (req.role.kind == RoleKind::Probe) {
      turns.push_back(req.messages.size());
      EXPECT_EQ(req.messages.front().content, "Video summary: Cars.");
      return "one";
    }
    return equality_judge(req);
  });
  auto gw = gateway_with(b);
  auto v = bias_filter(*gw, passed("How many cars?", "one"), Summary{"v", "Cars."}, 1.0);
  EXPECT_EQ(v.verdict, Verdict::Fail);
  EXPECT_EQ(turns, (std::vector<std::size_t>{2, 2}));
}

TEST(BiasFilter, JudgeFailureSkipsWithReason) {
  auto b = std::make_shared<ScriptedBackend>();
  b->set_responder([](const ChatRequest& req) -> std::optional<std::string> {
    return req.role.kind == RoleKind::Probe ? "one" : "unsure";
  });
  auto gw = gateway_with(b);
  auto v = bias_filter(*gw, passed("How many cars?", "one"), std::nullopt, 1.0);
  EXPECT_EQ(v.verdict, Verdict::Skipped);
  EXPECT_NE(v.reason.find("JudgeUnparseable"), std::string::npos) << v.reason;
}

TEST(Cascade, SimulatorOutcomes) {
  auto gw = gateway_with(testing::simulator_backend());
  auto caption = street();
  Summary summary{"v", "A short video of ordinary street scenes."};
  auto loc = passed("At what time does a red car passes happen?", "00:05");
  EXPECT_TRUE(run_cascade(*gw, loc, caption, summary, 1.0, 1.0).passed_all);
  auto sky = passed("What color is the sky?", "green");
  auto out = run_cascade(*gw, sky, caption, summary, 1.0, 1.0);
  EXPECT_EQ(out.f1.verdict, Verdict::Fail);
  EXPECT_EQ(out.f2.verdict, Verdict::Skipped);
  EXPECT_FALSE(out.passed_all);
}

std::string rewrite_reply(const std::vector<std::string>& texts, const std::string& key) {
  json opts = json::array();
  for (std::size_t i = 0; i < texts.size(); ++i) opts.push_back({{"letter", option_letter(static_cast<int>(i))}, {"text", texts[i]}});
  return json{{"options", opts}, {"answer", key}}.dump();
}

TEST(Rewrite, KeyFollowsTheCorrectOptionUnderShuffle) {
  auto b = std::make_shared<ScriptedBackend>();
  b->set_responder([](const ChatRequest& req) -> std::optional<std::string> {
    if (req.role.kind == RoleKind::Rewrite) return rewrite_reply({"two", "one", "three", "four"}, "B");
    return equality_judge(req);
  });
  auto gw = gateway_with(b);
  auto qa = passed("How many cars?", "one");
  std::set<std::string> keys;
  for (std::int64_t seed = 0; seed < 40; ++seed) {
    auto mc = rewrite_multiple_choice(*gw, qa, seed);
    ASSERT_TRUE(mc_shape_valid(mc));
    EXPECT_EQ(mc.form, QAForm::MultipleChoice);
    EXPECT_EQ(id_stem(mc.id), id_stem(qa.id));
    EXPECT_EQ(mc.id.substr(mc.id.size() - 3), "-mc");
    auto it = std::find_if(mc.options.begin(), mc.options.end(), [&](const Option& o) { return o.letter == mc.answer; });
    EXPECT_EQ(it->text, "one");
    keys.insert(mc.answer);
    EXPECT_EQ(to_json(rewrite_multiple_choice(*gw, qa, seed)), to_json(mc));
  }
  EXPECT_GT(keys.size(), 1u);
}

TEST(Rewrite, AmbiguityAndShapeErrors) {
  auto b = std::make_shared<ScriptedBackend>();
  std::string reply;
  b->set_responder([&](const ChatRequest& req) -> std::optional<std::string> {
    if (req.role.kind == RoleKind::Rewrite) return reply;
    return equality_judge(req);
  });
  auto gw = gateway_with(b);
  auto qa = passed("How many cars?", "one");
  auto code = [&](std::string r) {
    reply = std::move(r);
    try {
      rewrite_multiple_choice(*gw, qa, 1);
    } catch (const Error& e) {
      return e.code();
    }
    return ErrorCode::Io;
  };
  EXPECT_EQ(code(rewrite_reply({"one", "One.", "three", "four"}, "A")), ErrorCode::AmbiguousOptions);
  EXPECT_EQ(code(rewrite_reply({"two", "one", "three", "four"}, "A")), ErrorCode::AmbiguousOptions);
  EXPECT_EQ(code(rewrite_reply({"two", "five", "three", "four"}, "A")), ErrorCode::AmbiguousOptions);
  EXPECT_EQ(code(rewrite_reply({"one", "two", "three"}, "A")), ErrorCode::RewriteUnparseable);
  EXPECT_EQ(code(rewrite_reply({"one", "two", "three", "four"}, "E")), ErrorCode::RewriteUnparseable);
  EXPECT_EQ(code("{}"), ErrorCode::RewriteUnparseable);
  auto unpassed = qa;
  unpassed.verdicts.passed_all = false;
  EXPECT_THROW(rewrite_multiple_choice(*gw, unpassed, 1), Error);
}

TEST(Shuffle, IsAPermutation) {
  std::mt19937_64 rng(3);
  for (int draw = 0; draw < 200; ++draw) {
    std::vector<int> v(rng() % 12);
    for (std::size_t i = 0; i < v.size(); ++i) v[i] = static_cast<int>(i);
    auto w = v;
    auto seed = rng();
    seeded_shuffle(w, seed);
    auto again = v;
    seeded_shuffle(again, seed);
    EXPECT_EQ(w, again);
    std::sort(w.begin(), w.end());
    EXPECT_EQ(w, v);
  }
}

TEST(QAJson, RoundTrip) {
  auto qa = passed("How many cars?", "B");
  qa.form = QAForm::MultipleChoice;
  qa.options = {{"A", "two"}, {"B", "one"}};
  qa.verdicts.f2.probe_hits = {0, 1};
  auto back = qa_from_json(to_json(qa));
  EXPECT_EQ(to_json(back), to_json(qa));
  EXPECT_EQ(back.options, qa.options);
  EXPECT_EQ(render_question(qa), "How many cars?\nA. two\nB. one");
  EXPECT_THROW(parse_verdict("maybe"), Error);
}

TEST(IdStem, Suffixes) {
  EXPECT_EQ(id_stem("qa-123-oe"), "qa-123");
  EXPECT_EQ(id_stem("qa-123-mc"), "qa-123");
  EXPECT_EQ(id_stem("qa-123"), "qa-123");
}

}  // namespace
}  // namespace forge
