#pragma once

#include <filesystem>
#include <memory>
#include <random>
#include <string>
#include <vector>

#include "scenedialog/backends.hpp"
#include "scenedialog/model.hpp"
#include "scenedialog/pipeline.hpp"
#include "scenedialog/scripted.hpp"

namespace testsupport {

namespace fs = std::filesystem;
using namespace scenedialog;

fs::path fixture(const std::string& rel);
std::shared_ptr<const TemplateStore> prompts();

VideoManifest fixture_manifest();  // run_a: 2 characters, 4 segments of 4 s
ScriptedBackends fixture_script(const std::string& dir = "run_a");

PipelineContext scripted_context(const ScriptedBackends& s, std::shared_ptr<CallLog> log,
                                 PipelineConfig config = {});

// Entries of the log whose purpose matches exactly.
std::vector<json> calls_for(const CallLog& log, const std::string& purpose);
// Every user/system/assistant message text across all logged requests.
std::vector<std::string> prompt_texts(const CallLog& log);

std::string accept_json();
std::string reject_json(const std::string& suggestion);
std::string plot_roles_json();
std::string answer(const std::string& line);

// Random valid manifest with 1..4 characters and 1..8 segments.
VideoManifest random_manifest(std::mt19937_64& rng);

// Fresh empty directory under the system temp dir.
fs::path temp_dir(const std::string& tag);

}  // namespace testsupport
