// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <string_view>

namespace mrta::prompts
{

/// Assistant persona for live training sessions.
extern const std::string_view assistant_persona;

/// Conversation synthesis: brief and full task descriptions.
extern const std::string_view conversation_task_brief;
extern const std::string_view conversation_task_full;
extern const std::string_view tool_response_lead;

/// Requirement elicitation; followed by sample manuals.
extern const std::string_view requirements_task;

/// Syntax taught to the live agent for invoking tools.
extern const std::string_view tool_call_syntax;

/// Line grammar expected from the conversation generator.
extern const std::string_view transcript_format;

} // namespace mrta::prompts
