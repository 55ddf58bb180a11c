#pragma once

// One default-config synthetic corpus, generated once per test binary.

#include "changetrace/ground_truth.hpp"
#include "changetrace/pipeline.hpp"
#include "changetrace/synth.hpp"

namespace fixture {

struct SharedCorpus {
    ct::SynthCorpus synth;
    ct::ChainView view;
    ct::ClusterAssignment base;
    ct::GroundTruthSet gt;
};

inline const SharedCorpus& shared_corpus()
{
    static const SharedCorpus c = [] {
        SharedCorpus s;
        s.synth = ct::generate(ct::default_synth_config(), 42);
        s.view = ct::build_view(s.synth.records, s.synth.header.activation);
        s.base = ct::multi_input_clustering(s.view);
        s.gt = ct::extract_ground_truth(s.view, s.base, s.synth.tags);
        return s;
    }();
    return c;
}

/// Small forests trained on the shared corpus.
inline const ct::TrainedModels& shared_models()
{
    static const ct::TrainedModels m = [] {
        const auto& c = shared_corpus();
        ct::TrainOptions o;
        o.full.n_trees = 20;
        o.reduced.n_trees = 20;
        return ct::train_models(c.view, c.base, c.gt, o);
    }();
    return m;
}

}  // namespace fixture
