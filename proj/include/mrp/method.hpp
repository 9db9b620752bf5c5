#pragma once

#include "mrp/errors.hpp"

#include <cstddef>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace mrp {

/// Placeholder that every execution template must contain exactly once.
inline constexpr std::string_view kInputPlaceholder = "{input}";

enum class SegmentKind { description, meta, input };

inline std::string_view to_string(SegmentKind kind) {
    switch (kind) {
    case SegmentKind::description: return "description";
    case SegmentKind::meta: return "meta";
    case SegmentKind::input: return "input";
    }
    return "?";
}

struct PromptSegment {
    SegmentKind kind;
    std::string text;
};

/// An assembled prompt plus the provenance of each piece. The full text is
/// always the segment texts joined by one blank line.
class PromptText {
public:
    PromptText() = default;

    static PromptText from_segments(std::vector<PromptSegment> segments) {
        PromptText p;
        for (const PromptSegment& seg : segments) {
            if (seg.text.empty()) {
                throw EmptySegment("prompt segment '" + std::string(to_string(seg.kind)) +
                                   "' is empty");
            }
            if (!p.text_.empty()) {
                p.text_ += "\n\n";
            }
            p.text_ += seg.text;
        }
        p.segments_ = std::move(segments);
        return p;
    }

    const std::string& text() const { return text_; }
    const std::vector<PromptSegment>& segments() const { return segments_; }

private:
    std::string text_;
    std::vector<PromptSegment> segments_;
};

/// One entry of the reasoning pool: what the method is, how to describe it to
/// the scoring call, and how to run it.
struct MethodDescriptor {
    std::string id;
    std::string display_name;
    std::string description_prompt;
    std::string execution_template;
    std::string source_citation;

    void validate() const {
        if (id.empty()) {
            throw InvalidDescriptor("method id is empty");
        }
        for (char c : id) {
            bool ok = (c >= 'a' && c <= 'z') || (c >= '0' && c <= '9') || c == '_';
            if (!ok) {
                throw InvalidDescriptor("method id '" + id +
                                        "' must be lowercase alphanumeric or underscore");
            }
        }
        if (description_prompt.empty()) {
            throw InvalidDescriptor("method '" + id + "': description prompt is empty");
        }
        std::size_t count = 0;
        std::size_t pos = execution_template.find(kInputPlaceholder);
        while (pos != std::string::npos) {
            ++count;
            pos = execution_template.find(kInputPlaceholder, pos + kInputPlaceholder.size());
        }
        if (count != 1) {
            throw InvalidDescriptor("method '" + id + "': execution template must contain " +
                                    std::string(kInputPlaceholder) + " exactly once, found " +
                                    std::to_string(count));
        }
    }
};

/// Ordered, immutable-after-construction registry of reasoning methods.
/// Registration order is the tie-break order used by selection.
class Pool {
public:
    Pool() = default;
    explicit Pool(std::string meta_prompt) : meta_prompt_(std::move(meta_prompt)) {}

    std::size_t size() const { return methods_.size(); }
    const MethodDescriptor& at(std::size_t index) const { return methods_.at(index); }
    const std::vector<MethodDescriptor>& methods() const { return methods_; }
    const std::string& meta_prompt() const { return meta_prompt_; }

    bool contains(std::string_view id) const {
        for (const MethodDescriptor& m : methods_) {
            if (m.id == id) {
                return true;
            }
        }
        return false;
    }

    const MethodDescriptor* find(std::string_view id) const {
        for (const MethodDescriptor& m : methods_) {
            if (m.id == id) {
                return &m;
            }
        }
        return nullptr;
    }

    friend Pool register_method(Pool pool, MethodDescriptor descriptor);

private:
    std::vector<MethodDescriptor> methods_;
    std::string meta_prompt_;
};

/// Appends a validated descriptor; prior order is untouched.
inline Pool register_method(Pool pool, MethodDescriptor descriptor) {
    descriptor.validate();
    if (pool.contains(descriptor.id)) {
        throw DuplicateId("method id '" + descriptor.id + "' already registered");
    }
    pool.methods_.push_back(std::move(descriptor));
    return pool;
}

/// description ‖ meta ‖ input, joined with blank lines, in that order.
inline PromptText assemble_scoring_prompt(const MethodDescriptor& descriptor,
                                          const std::string& meta,
                                          const std::string& input) {
    return PromptText::from_segments({{SegmentKind::description, descriptor.description_prompt},
                                      {SegmentKind::meta, meta},
                                      {SegmentKind::input, input}});
}

/// The method's working prompt: its template with the input substituted in a
/// single pass. Substitution never recurses, so braces inside the input stay
/// verbatim. The result is audited as one segment because the template
/// interleaves method text and input.
inline PromptText assemble_execution_prompt(const MethodDescriptor& descriptor,
                                            const std::string& input) {
    if (input.empty()) {
        throw EmptySegment("execution input is empty");
    }
    descriptor.validate();
    std::string text = descriptor.execution_template;
    std::size_t pos = text.find(kInputPlaceholder);
    text.replace(pos, kInputPlaceholder.size(), input);
    return PromptText::from_segments({{SegmentKind::description, std::move(text)}});
}

} // namespace mrp
