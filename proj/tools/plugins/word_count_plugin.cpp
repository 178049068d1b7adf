// Stdio tool plugin: answers word_count requests over the line-oriented
// JSON protocol (one request object in, one reply object out).
#include <iostream>
#include <sstream>
#include <string>

#include <nlohmann/json.hpp>

int main() {
    std::string line;
    while (std::getline(std::cin, line)) {
        nlohmann::json reply;
        try {
            auto req = nlohmann::json::parse(line);
            reply["call_id"] = req.value("call_id", "");
            std::string tool = req.value("tool", "");
            if (tool != "word_count") {
                reply["success"] = false;
                reply["error"] = "unknown tool '" + tool + "'";
            } else {
                std::string text = req.at("args").value("text", "");
                std::istringstream words(text);
                std::string word;
                long count = 0;
                while (words >> word) ++count;
                reply["success"] = true;
                reply["content"] = std::to_string(count);
            }
        } catch (const std::exception& e) {
            reply["call_id"] = "";
            reply["success"] = false;
            reply["error"] = e.what();
        }
        std::cout << reply.dump() << "\n" << std::flush;
    }
    return 0;
}
