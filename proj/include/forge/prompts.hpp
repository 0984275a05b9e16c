// Copyright 2026 The Forge Authors
// SPDX-License-Identifier: Apache-2.0
//

// Prompt templates. The first four (thinking, non-thinking, video-text
// alignment, answer judge) are fixed external formats and must stay
// byte-for-byte stable; tests pin them. The rest are this project's own
// wording for the synthesis roles.

#pragma once

#include <string>
#include <string_view>

#include "forge/text.hpp"

namespace forge::prompts {

// --- fixed formats ----------------------------------------------------------

inline constexpr std::string_view kThinking =
    "You are a video understanding expert. You are given a video and a question. You need to "
    "answer the question based on the video content. Please answer the question step by step. "
    "When you need more video details, you will re-watch the relevant clips and use <action> and "
    "</action> to mark the actions, and use <observation> and </observation> to mark the visual "
    "details you observe. When you have enough information to determine the final answer, you "
    "will wrap the final answer in <answer> and </answer>.\n"
    "\n"
    "**Video Information and Question:**\n"
    "- **Video Duration:** {video_duration}\n"
    "- **Question:** {question}";

inline constexpr std::string_view kNonThinking =
    "You are a video understanding expert. You are given a video and a question. You need to "
    "answer the question based on the video content. Please directly provide your answer.\n"
    "\n"
    "Question: {question}";

inline constexpr std::string_view kVideoTextAlignment =
    "Analyze the provided video and generate a brief, chronologically ordered set of dense "
    "descriptions. Divide the video into some meaningful segments based on its storyline. Each "
    "segment should be as long as possible and encompass a relatively complete event or core "
    "scene. Each segment must be accompanied by its corresponding start and end timestamps. "
    "**Importantly**, ensure that the timestamps for all segments are continuous and cover the "
    "entire duration ({duration}) of the video, from beginning to end.\n"
    "\n"
    "For each segment:\n"
    "1. Provide a precise start and end timestamp (format: [MM:SS-MM:SS]).\n"
    "2. Write a concise but informative description of what is happening in that segment.\n"
    "3. Focus on actions, key objects, and interactions.\n"
    "\n"
    "Please format the output as:\n"
    "\n"
    "[MM:SS-MM:SS] Description of the segment.\n"
    "\n"
    "[MM:SS-MM:SS] Description of the next segment.\n"
    "(and so on, until the end of the video)";

inline constexpr std::string_view kAnswerJudge =
    "You are an AI assistant who will help me to judge whether the answer generated by a model "
    "is consistent with the standard answer.\n"
    "\n"
    "Input Illustration:\n"
    "Standard Answer is the standard answer to the question\n"
    "Model Answer is the answer generated by a model to this question.\n"
    "\n"
    "Task Illustration:\n"
    "Determine whether Standard Answer and Model Answer are consistent.\n"
    "Consistent Criteria:\n"
    "If the meaning is expressed in the same way, it is also considered consistent.\n"
    "\n"
    "Output Format:\n"
    "1. If they are consistent, output 1; if they are different, output 0.\n"
    "2. DIRECTLY output 1 or 0 without any other content.\n"
    "\n"
    "Question: {question}\n"
    "Model Answer: {extract_answer}\n"
    "Standard Answer: {gt_answer}\n"
    "Your output:";

inline std::string render_thinking(std::string_view duration, std::string_view question) {
  return text::render_template(kThinking, {{"video_duration", std::string(duration)},
                                           {"question", std::string(question)}});
}

inline std::string render_non_thinking(std::string_view question) {
  return text::render_template(kNonThinking, {{"question", std::string(question)}});
}

inline std::string render_video_text_alignment(std::string_view duration) {
  return text::render_template(kVideoTextAlignment, {{"duration", std::string(duration)}});
}

inline std::string render_answer_judge(std::string_view question, std::string_view model_answer,
                                       std::string_view gt_answer) {
  return text::render_template(kAnswerJudge, {{"question", std::string(question)},
                                              {"extract_answer", std::string(model_answer)},
                                              {"gt_answer", std::string(gt_answer)}});
}

// --- synthesis roles ---------------------------------------------------------

inline constexpr std::string_view kDescribeSegment =
    "You are watching one clip of a longer video. The clip runs from {start} to {end} of the "
    "video and lasts {clip_duration}. Describe the clip in detail: list every distinct event, "
    "action, object, on-screen text and change of state you can see, in chronological order.\n"
    "\n"
    "Give each event on its own line, with the time it happens measured from the start of the "
    "clip (between 00:00 and {clip_duration}):\n"
    "\n"
    "[MM:SS] Description of the event.";

inline constexpr std::string_view kSummarize =
    "Below is a detailed, timestamped caption of a video. Write a concise summary of the video "
    "in a short paragraph. Keep only the main storyline. Leave out fine details, exact counts, "
    "on-screen text and timestamps.\n"
    "\n"
    "Detailed caption:\n"
    "{caption}";

inline constexpr std::string_view kGenerateQA =
    "You are given two descriptions of the same video: a detailed, timestamped caption and a "
    "short summary. Write question-answer pairs that can be answered from the detailed caption "
    "but NOT from the summary alone. Questions must require fine-grained details of the video.\n"
    "\n"
    "Question types:\n"
    "{type_definitions}\n"
    "\n"
    "Number of questions wanted per type:\n"
    "{quotas}\n"
    "\n"
    "Detailed caption:\n"
    "{caption}\n"
    "\n"
    "Summary:\n"
    "{summary}\n"
    "\n"
    "Output a JSON array only. Each element is an object with the fields \"type\" (one of the "
    "type names above), \"question\" and \"answer\".";

inline constexpr std::string_view kVerifyAnswer =
    "Decide whether the answer to the question is factually correct according to the video "
    "caption below.\n"
    "\n"
    "Caption:\n"
    "{caption}\n"
    "\n"
    "Question: {question}\n"
    "Answer: {answer}\n"
    "\n"
    "Reply with True if the answer is correct and False otherwise.";

inline constexpr std::string_view kVerifyReminder = "Reminder: reply with True or False only.";

inline constexpr std::string_view kProbe =
    "Answer the following question as concisely as possible. If you are not sure, give your "
    "best guess.\n"
    "\n"
    "Question: {question}";

inline constexpr std::string_view kProbeSummaryPreamble = "Video summary: {summary}";

inline constexpr std::string_view kRewriteMultipleChoice =
    "Rewrite the open-ended question below as a multiple-choice question with exactly four "
    "options labelled A, B, C and D. Exactly one option must state the correct answer; the other "
    "three must be plausible but wrong.\n"
    "\n"
    "Question: {question}\n"
    "Correct answer: {answer}\n"
    "\n"
    "Output a JSON object only: {\"options\": [{\"letter\": \"A\", \"text\": \"...\"}, ...], "
    "\"answer\": \"<letter of the correct option>\"}.";

inline constexpr std::string_view kReasoner =
    "You are answering a question about a video you cannot see directly. You can look at the "
    "video through two tools:\n"
    "- segment_retrieval(\"query\"): finds the timestamp of an event from a natural language "
    "query.\n"
    "- segment_query(\"MM:SS\"): retrieves the detailed description of what happens around a "
    "timestamp.\n"
    "\n"
    "Think step by step. In every reply write your reasoning, then exactly one line of the form\n"
    "ACTION segment_retrieval(\"...\")\n"
    "ACTION segment_query(\"MM:SS\")\n"
    "ACTION final_answer(\"...\")\n"
    "Use final_answer once you have enough information.{answer_format}\n"
    "\n"
    "Question: {question}{history}";

inline constexpr std::string_view kReasonerReminder =
    "Reminder: end your reply with exactly one ACTION line, e.g. "
    "ACTION segment_query(\"01:30\").";

inline constexpr std::string_view kObserver =
    "You are the eyes of an agent answering questions about a video. The video is described by "
    "the timestamped caption below. Carry out the requested action using only the caption and "
    "report what is seen, citing timestamps as MM:SS.\n"
    "\n"
    "Caption:\n"
    "{caption}\n"
    "\n"
    "Action: {action}";

inline constexpr std::string_view kConvert =
    "Rewrite the agent trajectory below as a single first-person chain of thought, as if you "
    "were re-watching the video yourself. Keep the reasoning natural. Wrap every action, "
    "exactly as given, in <action></action>, followed by its observation, exactly as given, in "
    "<observation></observation>. Finish with the final answer, exactly as given, in "
    "<answer></answer>. Do not add, drop or reorder actions.\n"
    "\n"
    "Question: {question}\n"
    "\n"
    "Trajectory:\n"
    "{trajectory}";

inline constexpr std::string_view kConvertReminder =
    "Reminder: keep every action and observation verbatim and in order, each action in "
    "<action></action> immediately followed by its <observation></observation>, and end with "
    "one <answer></answer>.";

inline constexpr std::string_view kInfer =
    "Answer the question using only the actions and observations below. Reply with the answer "
    "only.\n"
    "\n"
    "Question: {question}\n"
    "\n"
    "{steps}";

inline constexpr std::string_view kObservationJudge =
    "You are an AI assistant who will help me to judge whether an observation reported by a "
    "model is faithful to the video.\n"
    "\n"
    "Input Illustration:\n"
    "Video Caption is a detailed, timestamped description of the video.\n"
    "Action is what the model did to look at the video.\n"
    "Observation is what the model reports seeing after the action.\n"
    "\n"
    "Task Illustration:\n"
    "Determine whether the Observation is supported by the Video Caption for the part of the "
    "video the Action looks at.\n"
    "\n"
    "Output Format:\n"
    "1. If the observation is faithful, output 1; otherwise, output 0.\n"
    "2. DIRECTLY output 1 or 0 without any other content.\n"
    "\n"
    "Video Caption:\n"
    "{caption}\n"
    "Action: {action}\n"
    "Observation: {observation}\n"
    "Your output:";

}  // namespace forge::prompts
