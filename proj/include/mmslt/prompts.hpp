#pragma once

// Registry of the six description prompts. Groups: (1,2) simple, (3,4)
// detailed, (5,6) in-context. Prompt (3) is the pipeline default: it asks for
// the sign components only and omits appearance and background.

#include <array>
#include <stdexcept>
#include <string>

namespace mmslt {

struct PromptTemplate {
    int id;
    const char* group;
    const char* text;
};

inline const std::array<PromptTemplate, 6>& prompt_registry() {
    static const std::array<PromptTemplate, 6> prompts = {{
        {1, "simple", "Describe this image."},
        {2, "simple", "Describe what the person in this image is doing."},
        {3, "detailed",
         "Describe only the sign language components of the person in this image: the shape and "
         "position of each hand and its fingers, the movement of the arms, the direction of the "
         "gaze, and the shape of the mouth. Do not mention the background, clothing, or identity "
         "of the person."},
        {4, "detailed",
         "Describe in detail everything the person in this image is doing, including their hands, "
         "arms, face, and posture."},
        {5, "in-context",
         "You are describing frames of sign language. Example description: \"The right hand is "
         "raised to chin height with the fingers spread apart; the eyes look forward and the "
         "mouth is slightly open.\" Describe the sign language components of the person in this "
         "image in the same style."},
        {6, "in-context",
         "Here are two example descriptions of signing: \"Both hands form fists held together at "
         "chest level.\" \"The left index finger points upward while the mouth forms an O shape.\" "
         "Now write a description of the hand shape, hand position, and facial expression of the "
         "person in this image."},
    }};
    return prompts;
}

constexpr int default_prompt_id = 3;

inline std::string render_prompt(int prompt_id) {
    for (const auto& p : prompt_registry()) {
        if (p.id == prompt_id) return p.text;
    }
    throw std::invalid_argument("unknown prompt id: " + std::to_string(prompt_id));
}

inline std::string prompt_group(int prompt_id) {
    for (const auto& p : prompt_registry()) {
        if (p.id == prompt_id) return p.group;
    }
    throw std::invalid_argument("unknown prompt id: " + std::to_string(prompt_id));
}

}  // namespace mmslt
