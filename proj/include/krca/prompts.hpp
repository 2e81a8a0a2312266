#pragma once

#include <map>
#include <string>

namespace krca {

enum class Stage { Locator, CypherGen, Summarizer, ReportGen, Estimator };

const char* stage_name(Stage stage);
const char* stage_template_file(Stage stage);

// Built-in copy of the corresponding prompts/ file; the two are kept
// byte-identical (tests enforce it).
const std::string& builtin_template(Stage stage);

// Five templates with {{slot}} placeholders. Files in a prompt directory
// override the built-ins per stage.
class PromptLibrary {
public:
    static PromptLibrary builtin();
    static PromptLibrary from_dir(const std::string& dir);

    std::string render(Stage stage, const std::map<std::string, std::string>& slots) const;
    const std::string& raw(Stage stage) const;

private:
    std::map<Stage, std::string> templates_;
};

}  // namespace krca
