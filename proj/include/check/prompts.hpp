#pragma once

// In-context learning prompts and their rendering. The prompt bodies are
// packaged here verbatim, quirks included; the fixture scripts key on the
// exact rendered strings, so any drift here breaks tests loudly.

#include <string>
#include <string_view>

namespace check::prompts {

// Relationship-chain extraction (pipe-delimited SRO lines, surface order).
inline constexpr std::string_view kChainExtraction =
    "Question: Who is the president of the country the Eiffel Tower is located in?\n"
    "SRO: | president of | country of |\n"
    "\n"
    "Question: What is the capital city of the country of citizenship of Ivanka Trump's spouse?\n"
    "SRO: | capital city | country of citizenship | spouse of |\n"
    "\n"
    "Question Who is the spouse of the head of state in the United States of America?\n"
    "SRO: | spouse of | head of state |\n"
    "\n"
    "Question: On which continent is the country of citizenship of the founder of the manufacturer of iPhone 5 situated?\n"
    "SRO: | continent of | country of citizenship | founder of | manufacturer of |";

// Place-vs-thing entity classification.
inline constexpr std::string_view kPlaceOrThing =
    "Choose between place, thing to describe the following entity:\n"
    "Entity: Eiffel Tower\n"
    "Type: thing\n"
    "\n"
    "Choose between place, thing to describe the following entity:\n"
    "Entity: Antarctica\n"
    "Type: place\n"
    "\n"
    "Choose between place, thing to describe the following entity:\n"
    "Entity: soccer\n"
    "Type: thing\n"
    "\n"
    "Choose between place, thing to describe the following entity:\n"
    "Entity: Japan\n"
    "Type: place";

// Triple-to-question rephrasing.
inline constexpr std::string_view kTripleToQuestion =
    "Rephrase the following triple as a question:\n"
    "Triple: | Eiffel Tower | located in |\n"
    "Question: What country is the Eiffel Tower located in?\n"
    "\n"
    "Rephrase the following triple as a question:\n"
    "Triple: | Joe Biden | spouse of |\n"
    "Question: Who is the spouse of Joe Biden?\n"
    "\n"
    "Rephrase the following triple as a question:\n"
    "Triple: | Ivanka Trump | spouse of |\n"
    "Question: What country is the Eiffel Tower located in?\n"
    "\n"
    "Rephrase the following triple as a question:\n"
    "Triple: | Rainn Wilson | country of citizenship |\n"
    "Question: What is the country of citizenship of Rainn Wilson?\n"
    "\n"
    "Rephrase the following triple as a question:\n"
    "Triple: | iPhone5 | manufactured by |\n"
    "Question: Who manufactures the iPhone5?";

// Single-entity question answering.
inline constexpr std::string_view kAnswerQuestion =
    "Question: What country is the Eiffel Tower located in?\n"
    "Answer: France\n"
    "\n"
    "Question: Who is the spouse of Joe Biden?\n"
    "Answer: Jill Biden\n"
    "\n"
    "Question: Who is the spouse of Ivanka Trump?\n"
    "Answer: Jared Kushner\n"
    "\n"
    "What is the country of citizenship of Rainn Wilson?\n"
    "Answer: United States of America\n"
    "\n"
    "Question Who manufactures the iPhone5?\n"
    "Answer: Apple";

inline std::string render_chain_extraction(std::string_view question) {
    std::string p(kChainExtraction);
    p += "\n\nQuestion: ";
    p += question;
    p += "\nSRO:";
    return p;
}

inline std::string render_place_or_thing(std::string_view entity) {
    std::string p(kPlaceOrThing);
    p += "\n\nChoose between place, thing to describe the following entity:\nEntity: ";
    p += entity;
    p += "\nType:";
    return p;
}

inline std::string render_triple_to_question(std::string_view entity, std::string_view relation) {
    std::string p(kTripleToQuestion);
    p += "\n\nRephrase the following triple as a question:\nTriple: | ";
    p += entity;
    p += " | ";
    p += relation;
    p += " |\nQuestion:";
    return p;
}

inline std::string render_answer_question(std::string_view question) {
    std::string p(kAnswerQuestion);
    p += "\n\nQuestion: ";
    p += question;
    p += "\nAnswer:";
    return p;
}

}  // namespace check::prompts
