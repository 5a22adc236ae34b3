#pragma once

// Per-image knowledge graph: the image's scene-graph triplets merged with the
// shared KB. The KB is held by reference (never copied per image); image and
// KB facts stay separable by source, and lookups are scoped to one side.

#include <algorithm>
#include <memory>
#include <set>
#include <string>
#include <vector>

#include "hvqr/entry.hpp"
#include "hvqr/error.hpp"
#include "hvqr/kb.hpp"
#include "hvqr/scene.hpp"
#include "hvqr/triplet.hpp"

namespace hvqr {

// A lookup answer plus the triplets that justify it.
struct LookupResult {
    std::vector<Entry> entries;        // sorted by name, deduplicated
    std::vector<Triplet> supporting;   // canonical order, deduplicated
};

class ImageKnowledgeGraph {
public:
    ImageKnowledgeGraph(SceneGraph scene, std::shared_ptr<const KnowledgeBase> kb)
        : image_id_(scene.image_id), image_triplets_(std::move(scene.triplets)),
          kb_(std::move(kb)) {
        if (!kb_) raise(ErrorKind::Contract, "image knowledge graph requires a knowledge base");
        std::sort(image_triplets_.begin(), image_triplets_.end());
        image_triplets_.erase(std::unique(image_triplets_.begin(), image_triplets_.end()),
                              image_triplets_.end());
        image_index_.build(image_triplets_);
        image_entries_ = std::move(scene.objects);
        for (const Triplet& t : image_triplets_) {
            image_entries_.insert(t.subject);
            image_entries_.insert(t.relation);
            image_entries_.insert(t.object);
            triplet_entities_.insert(t.subject);
            triplet_entities_.insert(t.object);
        }
    }

    const std::string& image_id() const { return image_id_; }
    const std::vector<Triplet>& image_triplets() const { return image_triplets_; }
    const KnowledgeBase& kb() const { return *kb_; }
    const std::shared_ptr<const KnowledgeBase>& kb_ptr() const { return kb_; }

    const EntryTable& image_entries() const { return image_entries_; }

    // Entities appearing in image triplets; the grounding set for _K roots.
    const EntryTable& visible_entities() const { return triplet_entities_; }

    // Entry-table view over the (name, kind)-keyed union of both sides.
    bool contains_entry(const Entry& e) const {
        return image_entries_.count(e) > 0 || kb_->has_entry(e);
    }

    std::size_t entry_count() const {
        std::size_t overlap = 0;
        for (const Entry& e : image_entries_) overlap += kb_->has_entry(e) ? 1 : 0;
        return image_entries_.size() + kb_->entries().size() - overlap;
    }

    // Entries filling the pattern's single unknown slot among triplets of the
    // requested scope, sorted by name.
    std::vector<Entry> lookup(const TripletPattern& pattern, Scope scope) const {
        return lookup_with_support(pattern, scope).entries;
    }

    LookupResult lookup_with_support(const TripletPattern& pattern, Scope scope) const {
        const Slot unknown = pattern.unknown_slot();
        const auto& pool = scope == Scope::ImageOnly ? image_triplets_ : kb_->triplets();
        const auto& index = scope == Scope::ImageOnly ? image_index_ : kb_->index();

        LookupResult result;
        std::set<Entry> unique;
        for (std::uint32_t i : index.matches(pattern)) {
            const Triplet& t = pool[i];
            result.supporting.push_back(t);
            switch (unknown) {
                case Slot::Subject: unique.insert(t.subject); break;
                case Slot::Relation: unique.insert(t.relation); break;
                case Slot::Object: unique.insert(t.object); break;
            }
        }
        result.entries.assign(unique.begin(), unique.end());
        return result;
    }

    bool operator==(const ImageKnowledgeGraph& other) const {
        return image_id_ == other.image_id_ && image_triplets_ == other.image_triplets_ &&
               image_entries_ == other.image_entries_ && kb_->triplets() == other.kb_->triplets();
    }

private:
    std::string image_id_;
    std::vector<Triplet> image_triplets_;
    std::shared_ptr<const KnowledgeBase> kb_;
    detail::PairIndex image_index_;
    EntryTable image_entries_;      // scene objects + entries referenced by image triplets
    EntryTable triplet_entities_;
};

// Pure merge; inputs are copied/shared, never modified.
inline ImageKnowledgeGraph merge(const SceneGraph& scene,
                                 std::shared_ptr<const KnowledgeBase> kb) {
    return ImageKnowledgeGraph(scene, std::move(kb));
}

} // namespace hvqr
