#include "tvc/jsonl.hpp"

#include <fstream>

#include <json.hpp>

#include "tvc/errors.hpp"

namespace tvc {

using ordered_json = nlohmann::ordered_json;

namespace {

std::ofstream open_out(const std::string& path, bool binary = false) {
    std::ofstream out(path, binary ? std::ios::binary : std::ios::out);
    if (!out) throw InputError("cannot open for writing: " + path);
    return out;
}

std::ifstream open_in(const std::string& path, bool binary = false) {
    std::ifstream in(path, binary ? std::ios::binary : std::ios::in);
    if (!in) throw InputError("cannot open: " + path);
    return in;
}

ordered_json parse_line(const std::string& line, const std::string& path, size_t lineno) {
    ordered_json j = ordered_json::parse(line, nullptr, false);
    if (j.is_discarded()) {
        throw InputError("malformed JSON at " + path + ":" + std::to_string(lineno));
    }
    return j;
}

const char* kind_name(QuestionKind kind) {
    switch (kind) {
        case QuestionKind::RemoveShapeCountColor: return "remove_shape_count_color";
        case QuestionKind::CountColor: return "count_color";
        case QuestionKind::CountShape: return "count_shape";
    }
    return "?";
}

QuestionKind kind_from(const std::string& name) {
    if (name == "remove_shape_count_color") return QuestionKind::RemoveShapeCountColor;
    if (name == "count_color") return QuestionKind::CountColor;
    if (name == "count_shape") return QuestionKind::CountShape;
    throw InputError("unknown question kind: " + name);
}

template <typename Enum>
Enum enum_from_word(const std::string& word, Enum last, const char* (*to_word)(Enum)) {
    for (int i = 0; i <= static_cast<int>(last); ++i) {
        Enum e = static_cast<Enum>(i);
        if (word == to_word(e)) return e;
    }
    throw InputError("unknown attribute word: " + word);
}

}  // namespace

void write_instances(const std::string& jsonl_path, const std::string& images_path,
                     const std::vector<TaskInstance>& instances) {
    std::ofstream out = open_out(jsonl_path);
    std::ofstream blob = open_out(images_path, true);
    uint64_t offset = 0;
    for (const TaskInstance& inst : instances) {
        ordered_json objects = ordered_json::array();
        for (const SceneObject& o : inst.scene.objects) {
            objects.push_back({{"row", o.row},
                               {"col", o.col},
                               {"shape", shape_word(o.shape)},
                               {"color", color_word(o.color)},
                               {"size", size_word(o.size)}});
        }
        ordered_json rec = {
            {"id", inst.id},
            {"seed", inst.seed},
            {"question", inst.question},
            {"ground_truth", inst.ground_truth},
            {"text_leak", inst.text_leak},
            {"kind", kind_name(inst.kind)},
            {"qcolor", color_word(inst.qcolor)},
            {"qshape", shape_word(inst.qshape)},
            {"scene", {{"rows", inst.scene.rows}, {"cols", inst.scene.cols}, {"objects", objects}}},
            {"image",
             {{"offset", offset}, {"rows", inst.image.rows()}, {"cols", inst.image.cols()}}},
        };
        out << rec.dump() << '\n';
        for (Eigen::Index r = 0; r < inst.image.rows(); ++r) {
            for (Eigen::Index c = 0; c < inst.image.cols(); ++c) {
                double v = inst.image(r, c);
                blob.write(reinterpret_cast<const char*>(&v), sizeof(v));
            }
        }
        offset += static_cast<uint64_t>(inst.image.size()) * sizeof(double);
    }
    if (!out || !blob) throw InputError("instance write failed: " + jsonl_path);
}

std::vector<TaskInstance> read_instances(const std::string& jsonl_path,
                                         const std::string& images_path) {
    std::ifstream in = open_in(jsonl_path);
    std::ifstream blob = open_in(images_path, true);
    std::vector<TaskInstance> out;
    std::string line;
    size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        ordered_json j = parse_line(line, jsonl_path, lineno);
        TaskInstance inst;
        inst.id = j.at("id").get<std::string>();
        inst.seed = j.at("seed").get<uint64_t>();
        inst.question = j.at("question").get<std::string>();
        inst.ground_truth = j.at("ground_truth").get<std::string>();
        inst.text_leak = j.at("text_leak").get<bool>();
        inst.kind = kind_from(j.at("kind").get<std::string>());
        inst.qcolor = enum_from_word(j.at("qcolor").get<std::string>(), ColorAttr::Yellow,
                                     &color_word);
        inst.qshape = enum_from_word(j.at("qshape").get<std::string>(), Shape::Triangle,
                                     &shape_word);
        const auto& scene = j.at("scene");
        inst.scene.rows = scene.at("rows").get<int>();
        inst.scene.cols = scene.at("cols").get<int>();
        inst.scene.seed = inst.seed;
        for (const auto& jo : scene.at("objects")) {
            SceneObject o;
            o.row = jo.at("row").get<int>();
            o.col = jo.at("col").get<int>();
            o.shape = enum_from_word(jo.at("shape").get<std::string>(), Shape::Triangle,
                                     &shape_word);
            o.color = enum_from_word(jo.at("color").get<std::string>(), ColorAttr::Yellow,
                                     &color_word);
            o.size = jo.at("size").get<std::string>() == "small" ? SizeAttr::Small
                                                                 : SizeAttr::Large;
            inst.scene.objects.push_back(o);
        }
        const auto& img = j.at("image");
        Eigen::Index rows = img.at("rows").get<Eigen::Index>();
        Eigen::Index cols = img.at("cols").get<Eigen::Index>();
        blob.seekg(static_cast<std::streamoff>(img.at("offset").get<uint64_t>()));
        inst.image.resize(rows, cols);
        for (Eigen::Index r = 0; r < rows; ++r) {
            for (Eigen::Index c = 0; c < cols; ++c) {
                double v = 0;
                blob.read(reinterpret_cast<char*>(&v), sizeof(v));
                inst.image(r, c) = v;
            }
        }
        if (!blob) throw InputError("image sidecar truncated: " + images_path);
        out.push_back(std::move(inst));
    }
    return out;
}

void write_traces(const std::string& path, const std::vector<ReasoningTrace>& traces) {
    std::ofstream out = open_out(path);
    for (const ReasoningTrace& t : traces) {
        ordered_json markers = ordered_json::array();
        for (const auto& [idx, word] : t.markers) markers.push_back({idx, word});
        ordered_json rec = {
            {"id", t.id},           {"question", t.question},
            {"image_ref", t.image_ref}, {"steps", t.steps},
            {"markers", markers},   {"answer", t.answer},
            {"provenance", provenance_name(t.provenance)},
        };
        out << rec.dump() << '\n';
    }
    if (!out) throw InputError("trace write failed: " + path);
}

std::vector<ReasoningTrace> read_traces(const std::string& path) {
    std::ifstream in = open_in(path);
    std::vector<ReasoningTrace> out;
    std::string line;
    size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        ordered_json j = parse_line(line, path, lineno);
        ReasoningTrace t;
        t.id = j.at("id").get<std::string>();
        t.question = j.at("question").get<std::string>();
        t.image_ref = j.at("image_ref").get<std::string>();
        t.steps = j.at("steps").get<std::vector<std::string>>();
        for (const auto& m : j.at("markers")) {
            t.markers.emplace_back(m.at(0).get<int>(), m.at(1).get<std::string>());
        }
        t.answer = j.at("answer").get<std::string>();
        t.provenance = provenance_from(j.at("provenance").get<std::string>());
        out.push_back(std::move(t));
    }
    return out;
}

void write_ablation_records(const std::string& path, const std::vector<AblationRecord>& records) {
    std::ofstream out = open_out(path);
    for (const AblationRecord& r : records) {
        ordered_json rec = {
            {"id", r.id},         {"k", r.k},
            {"prompt_len", r.prompt_len}, {"cutoff", r.cutoff},
            {"answer", r.answer}, {"correct", r.correct},
            {"missing_answer", r.missing_answer},
        };
        out << rec.dump() << '\n';
    }
    if (!out) throw InputError("record write failed: " + path);
}

void write_pipeline_items(const std::string& path, const std::vector<PipelineItem>& items) {
    std::ofstream out = open_out(path);
    for (const PipelineItem& item : items) {
        ordered_json rec = {
            {"question_id", item.question_id}, {"question", item.question},
            {"text", item.text},               {"tokens", item.tokens},
            {"correct", item.correct},         {"sample_seed", item.sample_seed},
            {"stage_log", item.stage_log},
        };
        out << rec.dump() << '\n';
    }
    if (!out) throw InputError("pipeline write failed: " + path);
}

std::vector<PipelineItem> read_pipeline_items(const std::string& path) {
    std::ifstream in = open_in(path);
    std::vector<PipelineItem> out;
    std::string line;
    size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        ordered_json j = parse_line(line, path, lineno);
        PipelineItem item;
        item.question_id = j.at("question_id").get<std::string>();
        item.question = j.at("question").get<std::string>();
        item.text = j.at("text").get<std::string>();
        item.tokens = j.at("tokens").get<int>();
        item.correct = j.at("correct").get<bool>();
        item.sample_seed = j.at("sample_seed").get<uint64_t>();
        item.stage_log = j.at("stage_log").get<std::vector<std::string>>();
        out.push_back(std::move(item));
    }
    return out;
}

}  // namespace tvc
