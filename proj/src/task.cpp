#include "tvc/task.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "tvc/errors.hpp"

namespace tvc {

const char* shape_word(Shape s) {
    switch (s) {
        case Shape::Circle: return "circle";
        case Shape::Square: return "square";
        case Shape::Triangle: return "triangle";
    }
    return "?";
}

const char* shape_plural(Shape s) {
    switch (s) {
        case Shape::Circle: return "circles";
        case Shape::Square: return "squares";
        case Shape::Triangle: return "triangles";
    }
    return "?";
}

const char* color_word(ColorAttr c) {
    switch (c) {
        case ColorAttr::Red: return "red";
        case ColorAttr::Green: return "green";
        case ColorAttr::Blue: return "blue";
        case ColorAttr::Yellow: return "yellow";
    }
    return "?";
}

const char* size_word(SizeAttr s) {
    return s == SizeAttr::Small ? "small" : "large";
}

const SceneObject* Scene::at(int row, int col) const {
    for (const SceneObject& o : objects) {
        if (o.row == row && o.col == col) return &o;
    }
    return nullptr;
}

bool object_kept(const SceneObject& obj, QuestionKind kind, ColorAttr qcolor, Shape qshape) {
    switch (kind) {
        case QuestionKind::RemoveShapeCountColor:
            return obj.color == qcolor && obj.shape != qshape;
        case QuestionKind::CountColor:
            return obj.color == qcolor;
        case QuestionKind::CountShape:
            return obj.shape == qshape;
    }
    return false;
}

int count_answer(const Scene& scene, QuestionKind kind, ColorAttr qcolor, Shape qshape) {
    int n = 0;
    for (const SceneObject& o : scene.objects) {
        if (object_kept(o, kind, qcolor, qshape)) ++n;
    }
    return n;
}

namespace {

uint64_t mix(uint64_t a, uint64_t b) {
    uint64_t z = a + 0x9e3779b97f4a7c15ULL * (b + 1);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

int uniform_int(std::mt19937_64& rng, int lo, int hi) {  // inclusive
    return lo + static_cast<int>(rng() % static_cast<uint64_t>(hi - lo + 1));
}

}  // namespace

TaskInstance gen_instance(uint64_t seed, const TaskConfig& cfg) {
    const int cells = cfg.grid * cfg.grid;
    if (cfg.max_objects > cells || cfg.min_objects < 1 || cfg.min_objects > cfg.max_objects) {
        throw InfeasibleConfigError("object count bounds do not fit the grid");
    }
    std::mt19937_64 rng(mix(seed, 0xc0ffee));

    Scene scene;
    scene.rows = scene.cols = cfg.grid;
    scene.seed = seed;
    int n = uniform_int(rng, cfg.min_objects, cfg.max_objects);
    std::vector<int> cell_ids(static_cast<size_t>(cells));
    for (int i = 0; i < cells; ++i) cell_ids[static_cast<size_t>(i)] = i;
    std::shuffle(cell_ids.begin(), cell_ids.end(), rng);
    for (int i = 0; i < n; ++i) {
        SceneObject o;
        o.row = cell_ids[static_cast<size_t>(i)] / cfg.grid;
        o.col = cell_ids[static_cast<size_t>(i)] % cfg.grid;
        o.shape = static_cast<Shape>(uniform_int(rng, 0, 2));
        o.color = static_cast<ColorAttr>(uniform_int(rng, 0, 3));
        o.size = static_cast<SizeAttr>(uniform_int(rng, 0, 1));
        scene.objects.push_back(o);
    }
    std::sort(scene.objects.begin(), scene.objects.end(),
              [&](const SceneObject& a, const SceneObject& b) {
                  return a.row * cfg.grid + a.col < b.row * cfg.grid + b.col;
              });

    TaskInstance inst;
    inst.id = "inst-" + std::to_string(seed);
    inst.seed = seed;
    inst.scene = scene;
    inst.text_leak = cfg.text_leak;

    // Anchor the question on one object so the answer is always >= min_answer.
    const SceneObject& anchor = scene.objects[static_cast<size_t>(uniform_int(rng, 0, n - 1))];
    inst.kind = static_cast<QuestionKind>(uniform_int(rng, 0, 2));
    inst.qcolor = anchor.color;
    if (inst.kind == QuestionKind::RemoveShapeCountColor) {
        Shape s = static_cast<Shape>(uniform_int(rng, 0, 1));
        inst.qshape = s == anchor.shape ? static_cast<Shape>((static_cast<int>(s) + 1) % 3) : s;
        if (inst.qshape == anchor.shape) inst.qshape = static_cast<Shape>((static_cast<int>(anchor.shape) + 1) % 3);
    } else {
        inst.qshape = anchor.shape;
    }
    int answer = count_answer(scene, inst.kind, inst.qcolor, inst.qshape);
    if (answer < cfg.min_answer) throw InfeasibleConfigError("anchored question below min_answer");

    switch (inst.kind) {
        case QuestionKind::RemoveShapeCountColor:
            inst.question = std::string("How many ") + color_word(inst.qcolor) +
                            " objects remain after removing all " + shape_plural(inst.qshape) + " ?";
            break;
        case QuestionKind::CountColor:
            inst.question = std::string("How many ") + color_word(inst.qcolor) + " objects are there ?";
            break;
        case QuestionKind::CountShape:
            inst.question = std::string("How many ") + shape_plural(inst.qshape) + " are there ?";
            break;
    }
    inst.ground_truth = std::to_string(answer);
    if (inst.text_leak) {
        inst.question += " ( answer " + inst.ground_truth + " )";
    }
    inst.image = render(scene, cfg.cell_pixels);
    return inst;
}

Matrix render(const Scene& scene, int cell_pixels) {
    Matrix img = Matrix::Zero(scene.rows * cell_pixels, scene.cols * cell_pixels);
    if (cell_pixels < 4) throw InfeasibleConfigError("cell_pixels must be >= 4");
    for (const SceneObject& o : scene.objects) {
        int r0 = o.row * cell_pixels;
        int c0 = o.col * cell_pixels;
        img(r0, c0 + 3) = 1.0;                              // occupied flag
        img(r0, c0 + static_cast<int>(o.shape)) = 1.0;      // shape one-hot
        img(r0 + 1, c0 + static_cast<int>(o.color)) = 1.0;  // color one-hot
        img(r0 + 2, c0 + static_cast<int>(o.size)) = 1.0;   // size one-hot
        switch (o.shape) {                                  // decorative glyph
            case Shape::Circle:
                img(r0 + 3, c0) = 0.3; img(r0 + 3, c0 + 1) = 0.8;
                img(r0 + 3, c0 + 2) = 0.8; img(r0 + 3, c0 + 3) = 0.3;
                break;
            case Shape::Square:
                img(r0 + 3, c0) = 0.8; img(r0 + 3, c0 + 1) = 0.8;
                img(r0 + 3, c0 + 2) = 0.8; img(r0 + 3, c0 + 3) = 0.8;
                break;
            case Shape::Triangle:
                img(r0 + 3, c0) = 0.2; img(r0 + 3, c0 + 1) = 0.5;
                img(r0 + 3, c0 + 2) = 0.8; img(r0 + 3, c0 + 3) = 0.5;
                break;
        }
    }
    return img;
}

ReasoningTrace base_cot_trace(const TaskInstance& inst, const TraceOptions& opts) {
    ReasoningTrace trace;
    trace.id = inst.id;
    trace.question = inst.question;
    trace.image_ref = opts.text_only ? "" : inst.id;  // empty = image-free variant
    trace.provenance = Provenance::Base;

    // Fixed-format restatement of the question filter: the comparison
    // operands for every keep/skip decision sit at fixed trace positions.
    // Slots: keep-color, keep-shape, remove-shape; "unk" = unconstrained.
    std::string slot1 = "unk", slot2 = "unk", slot3 = "unk";
    switch (inst.kind) {
        case QuestionKind::RemoveShapeCountColor:
            slot1 = color_word(inst.qcolor);
            slot3 = shape_word(inst.qshape);
            break;
        case QuestionKind::CountColor:
            slot1 = color_word(inst.qcolor);
            break;
        case QuestionKind::CountShape:
            slot2 = shape_word(inst.qshape);
            break;
    }
    trace.steps.push_back("look " + slot1 + " " + slot2 + " " + slot3 + " .");

    // Each cell step states the observed attributes, then a per-attribute
    // verdict against the look slots (cm/cx color, sm/sx shape), then the
    // keep decision (= cm && sm, purely symbolic) and the running count.
    const Scene& scene = inst.scene;
    int count = 0;
    for (int r = 0; r < scene.rows; ++r) {
        for (int c = 0; c < scene.cols; ++c) {
            std::string color_tok = "empty", shape_tok = "empty";
            if (opts.text_only) {
                color_tok = shape_tok = "unk";
            } else if (const SceneObject* o = scene.at(r, c)) {
                color_tok = color_word(o->color);
                shape_tok = shape_word(o->shape);
            }
            bool cm = slot1 == "unk" || color_tok == slot1;
            bool sm = (slot2 == "unk" || shape_tok == slot2) &&
                      (slot3 == "unk" || shape_tok != slot3);
            bool kept = cm && sm && !opts.text_only && scene.at(r, c) != nullptr;
            if (kept) ++count;
            trace.steps.push_back("cell " + std::to_string(r) + " " + std::to_string(c) + " " +
                                  color_tok + " " + (cm ? "cm" : "cx") + " " + shape_tok + " " +
                                  (sm ? "sm" : "sx") + " " + (kept ? "keep" : "skip") + " " +
                                  std::to_string(opts.text_only ? 0 : count) + " .");
        }
    }

    std::mt19937_64 rng(mix(inst.seed, 0x5eed + opts.seed));
    if (!opts.text_only && opts.marker_frac > 0 &&
        (rng() >> 11) * 0x1.0p-53 < opts.marker_frac && !scene.objects.empty()) {
        const SceneObject& o =
            scene.objects[static_cast<size_t>(uniform_int(rng, 0, static_cast<int>(scene.objects.size()) - 1))];
        SceneObject wrong = o;
        wrong.color = static_cast<ColorAttr>((static_cast<int>(o.color) + 1) % 4);
        wrong.shape = static_cast<Shape>((static_cast<int>(o.shape) + 1) % 3);
        std::string where = std::to_string(o.row) + " " + std::to_string(o.col);
        trace.markers.emplace_back(static_cast<int>(trace.steps.size()), "Hmm");
        trace.steps.push_back("Hmm maybe cell " + where + " was " + size_word(wrong.size) + " " +
                              color_word(wrong.color) + " " + shape_word(wrong.shape) + " .");
        trace.markers.emplace_back(static_cast<int>(trace.steps.size()), "Wait");
        trace.steps.push_back("Wait cell " + where + " is " + size_word(o.size) + " " +
                              color_word(o.color) + " " + shape_word(o.shape) + " .");
        if (uniform_int(rng, 0, 1) == 1) {
            trace.markers.emplace_back(static_cast<int>(trace.steps.size()), "Alternatively");
            trace.steps.push_back("Alternatively the count is " + std::to_string(count) + " .");
        }
    }

    if (opts.text_only) {
        trace.answer = inst.text_leak ? inst.ground_truth : "0";
    } else {
        trace.answer = std::to_string(count);
    }
    trace.steps.push_back("Answer : " + trace.answer + " .");
    return trace;
}

bool planted(int i, double frac, double phase) {
    if (frac <= 0) return false;
    if (frac >= 1) return true;
    return std::floor((i + 1 + phase) * frac) > std::floor((i + phase) * frac);
}

std::vector<CorpusItem> gen_corpus(const CorpusConfig& cfg) {
    std::vector<CorpusItem> out;
    out.reserve(static_cast<size_t>(cfg.n));
    for (int i = 0; i < cfg.n; ++i) {
        TaskConfig tc = cfg.task;
        tc.text_leak = planted(i, cfg.leak_frac, 0.0);
        uint64_t inst_seed = mix(cfg.seed, static_cast<uint64_t>(i));
        CorpusItem item;
        item.instance = gen_instance(inst_seed, tc);
        item.text_only = planted(i, cfg.text_only_frac, 0.73);
        TraceOptions topts;
        topts.text_only = item.text_only;
        topts.marker_frac = planted(i, cfg.marker_frac, 0.37) ? 1.0 : 0.0;
        topts.seed = cfg.seed;
        item.trace = base_cot_trace(item.instance, topts);
        out.push_back(std::move(item));
    }
    return out;
}

}  // namespace tvc
