#include "floodgnn/json_util.hpp"

#include "floodgnn/common.hpp"

namespace floodgnn {

namespace {

void dump_into(const nlohmann::json& j, std::string& out) {
    switch (j.type()) {
        case nlohmann::json::value_t::object: {
            out += '{';
            bool first = true;
            for (auto it = j.begin(); it != j.end(); ++it) {
                if (!first) out += ',';
                first = false;
                out += nlohmann::json(it.key()).dump();
                out += ':';
                dump_into(it.value(), out);
            }
            out += '}';
            break;
        }
        case nlohmann::json::value_t::array: {
            out += '[';
            for (std::size_t i = 0; i < j.size(); ++i) {
                if (i) out += ',';
                dump_into(j[i], out);
            }
            out += ']';
            break;
        }
        case nlohmann::json::value_t::number_float:
            out += format_double(j.get<double>());
            break;
        default:
            out += j.dump();
    }
}

}  // namespace

std::string dump_json(const nlohmann::json& j) {
    std::string out;
    dump_into(j, out);
    return out;
}

}  // namespace floodgnn
