#pragma once

#include <string_view>

namespace hybridrag::prompts {

// Instruction-enhanced completion prompt:
//   Reference: <bullet>\n<bullet>...\n\nComplete the following text based on the reference:\n\n<context>
inline constexpr std::string_view kReferencePrefix = "Reference: ";
inline constexpr std::string_view kCompletionInstruction = "Complete the following text based on the reference:";

// Key-takeaway extraction prompt.
inline constexpr std::string_view kTakeawayInstruction =
    "Your task is to carefully read each paragraph and generate a list of key takeaways from the paragraphs "
    "in concise sentences. Key takeaways for each paragraph should be no longer than 64 words and should "
    "include important details such as facts, entities, persons, organizations, numbers, years, and "
    "locations. Please keep each key takeaway short. When referring to previously mentioned entities, use "
    "the entity name instead of the pronoun 'it'. Please ensure that your output adheres to these "
    "guidelines to the best of your ability.";
inline constexpr std::string_view kTakeawayTrailer = "Key Takeaways: ### P1:";
inline constexpr std::string_view kBulletPrefix = "- ";

} // namespace hybridrag::prompts
