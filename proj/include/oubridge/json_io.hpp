#pragma once

#include <json.hpp>

#include "oubridge/kl_solver.hpp"
#include "oubridge/quantizer.hpp"

namespace oubridge {

inline void to_json(nlohmann::json& j, const OuParams& p) {
    j = {{"theta", p.theta}, {"mu", p.mu},   {"sigma", p.sigma},
         {"sigma0", p.sigma0}, {"x0", p.x0}, {"T", p.T}};
}

inline void from_json(const nlohmann::json& j, OuParams& p) {
    j.at("theta").get_to(p.theta);
    j.at("mu").get_to(p.mu);
    j.at("sigma").get_to(p.sigma);
    j.at("sigma0").get_to(p.sigma0);
    j.at("x0").get_to(p.x0);
    j.at("T").get_to(p.T);
}

inline void to_json(nlohmann::json& j, const KlMode& m) {
    j = {{"n", m.n}, {"omega", m.omega}, {"lambda", m.lambda}, {"norm", m.norm}};
}

inline void from_json(const nlohmann::json& j, KlMode& m) {
    j.at("n").get_to(m.n);
    j.at("omega").get_to(m.omega);
    j.at("lambda").get_to(m.lambda);
    j.at("norm").get_to(m.norm);
}

inline void to_json(nlohmann::json& j, const KlBasis& b) {
    j = {{"params", b.params}, {"case", to_string(b.freq_case)}, {"modes", b.modes}};
}

inline void from_json(const nlohmann::json& j, KlBasis& b) {
    j.at("params").get_to(b.params);
    j.at("modes").get_to(b.modes);
    const std::string tag = j.at("case").get<std::string>();
    for (FrequencyCase c : {FrequencyCase::DeterministicStart, FrequencyCase::CriticalRatio,
                            FrequencyCase::SubCritical, FrequencyCase::SuperCritical})
        if (tag == to_string(c)) b.freq_case = c;
}

inline void to_json(nlohmann::json& j, const Codebook& c) {
    j = {{"dim", c.dim}, {"points", c.points}, {"probabilities", c.probabilities}};
}

inline void from_json(const nlohmann::json& j, Codebook& c) {
    j.at("dim").get_to(c.dim);
    j.at("points").get_to(c.points);
    j.at("probabilities").get_to(c.probabilities);
}

inline void to_json(nlohmann::json& j, const DistortionReport& r) {
    j = {{"m", r.m},
         {"tail", r.tail},
         {"finite_dim_error_sq", r.finite_dim_error_sq},
         {"total_sq", r.total_sq}};
}

inline void to_json(nlohmann::json& j, const FunctionalQuantizer& fq) {
    j = {{"params", fq.spec.params},
         {"z", fq.spec.z},
         {"basis", fq.basis},
         {"codebook", fq.codebook},
         {"report", fq.report}};
}

}  // namespace oubridge
