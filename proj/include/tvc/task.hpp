#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "tvc/sequence.hpp"
#include "tvc/trace.hpp"

namespace tvc {

enum class Shape { Circle, Square, Triangle };
enum class ColorAttr { Red, Green, Blue, Yellow };
enum class SizeAttr { Small, Large };

const char* shape_word(Shape s);
const char* shape_plural(Shape s);
const char* color_word(ColorAttr c);
const char* size_word(SizeAttr s);

struct SceneObject {
    int row = 0;
    int col = 0;
    Shape shape = Shape::Circle;
    ColorAttr color = ColorAttr::Red;
    SizeAttr size = SizeAttr::Small;
};

struct Scene {
    int rows = 4;
    int cols = 4;
    std::vector<SceneObject> objects;  // distinct cells
    uint64_t seed = 0;

    const SceneObject* at(int row, int col) const;
};

enum class QuestionKind { RemoveShapeCountColor, CountColor, CountShape };

struct TaskConfig {
    int grid = 4;          // scene is grid x grid cells
    int cell_pixels = 4;   // rendered cell edge, one patch per cell
    int min_objects = 3;
    int max_objects = 6;
    bool text_leak = false;  // embed "( answer N )" in the question
    int min_answer = 1;      // construction guarantees ground truth >= this
};

struct TaskInstance {
    std::string id;
    Scene scene;
    Matrix image;
    std::string question;
    std::string ground_truth;
    bool text_leak = false;
    uint64_t seed = 0;
    QuestionKind kind = QuestionKind::CountColor;
    ColorAttr qcolor = ColorAttr::Red;
    Shape qshape = Shape::Circle;
};

// Whether an object counts toward the answer of a question.
bool object_kept(const SceneObject& obj, QuestionKind kind, ColorAttr qcolor, Shape qshape);
// Independent counting oracle over the scene ledger.
int count_answer(const Scene& scene, QuestionKind kind, ColorAttr qcolor, Shape qshape);

// Deterministic per seed. Throws InfeasibleConfigError when the grid cannot
// hold the requested object count.
TaskInstance gen_instance(uint64_t seed, const TaskConfig& cfg = {});

// Rasterizes each object into its cell with a distinct per-attribute pixel
// pattern; background zero; injective over the attribute space.
Matrix render(const Scene& scene, int cell_pixels = 4);

struct TraceOptions {
    double marker_frac = 0.0;  // fraction of traces with planted reflections
    bool text_only = false;    // image-absent variant: unknown attrs, count 0
    uint64_t seed = 0;
};

// Oracle-written chain-of-thought: a fixed-width scan over every cell with a
// running count, optional reflection steps, then the final answer step.
ReasoningTrace base_cot_trace(const TaskInstance& inst, const TraceOptions& opts = {});

struct CorpusConfig {
    int n = 2000;
    uint64_t seed = 7;
    double leak_frac = 0.0;
    double marker_frac = 0.0;
    double text_only_frac = 0.0;
    TaskConfig task;
};

struct CorpusItem {
    TaskInstance instance;
    ReasoningTrace trace;
    bool text_only = false;
};

std::vector<CorpusItem> gen_corpus(const CorpusConfig& cfg);

// Deterministic planting pattern used by gen_corpus: item i is marked iff the
// Bresenham accumulator for `frac` ticks at i (exact counts, no sampling noise).
bool planted(int i, double frac, double phase);

}  // namespace tvc
