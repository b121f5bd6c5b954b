#pragma once

#include <string>
#include <vector>

#include "tvc/ablation.hpp"
#include "tvc/distill.hpp"
#include "tvc/task.hpp"
#include "tvc/trace.hpp"

namespace tvc {

// Instances as JSONL plus a binary sidecar holding the rendered images
// (f64 little-endian row-major blobs, offsets recorded per record).
void write_instances(const std::string& jsonl_path, const std::string& images_path,
                     const std::vector<TaskInstance>& instances);
std::vector<TaskInstance> read_instances(const std::string& jsonl_path,
                                         const std::string& images_path);

// Traces as JSONL; fields mirror ReasoningTrace exactly.
void write_traces(const std::string& path, const std::vector<ReasoningTrace>& traces);
std::vector<ReasoningTrace> read_traces(const std::string& path);

// Per-(instance, k) ablation records.
void write_ablation_records(const std::string& path, const std::vector<AblationRecord>& records);

// Pipeline samples with their stage logs.
void write_pipeline_items(const std::string& path, const std::vector<PipelineItem>& items);
std::vector<PipelineItem> read_pipeline_items(const std::string& path);

}  // namespace tvc
