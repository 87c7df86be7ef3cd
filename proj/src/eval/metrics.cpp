#include <cstdlib>

#include "occuforge/error.hpp"
#include "occuforge/eval.hpp"

namespace occuforge::eval {

namespace {

void check_pair(std::span<const std::uint8_t> pred, std::span<const std::uint8_t> obs) {
    if (pred.size() != obs.size()) throw Error("prediction and observation windows differ in length");
    if (pred.empty()) throw Error("empty prediction window");
}

}  // namespace

double window_mae(std::span<const std::uint8_t> pred, std::span<const std::uint8_t> obs) {
    check_pair(pred, obs);
    int wrong = 0;
    for (std::size_t i = 0; i < pred.size(); ++i) wrong += std::abs(int{pred[i]} - int{obs[i]});
    return static_cast<double>(wrong) / static_cast<double>(pred.size());
}

WindowScore score_window(std::span<const std::uint8_t> pred, std::span<const std::uint8_t> obs) {
    check_pair(pred, obs);
    WindowScore s;
    for (std::size_t i = 0; i < pred.size(); ++i) {
        if (pred[i] && obs[i]) ++s.tp;
        else if (pred[i]) ++s.fp;
        else if (obs[i]) ++s.fn;
        else ++s.tn;
    }
    const double k = static_cast<double>(pred.size());
    s.mae = static_cast<double>(s.fp + s.fn) / k;
    s.accuracy = static_cast<double>(s.tp + s.tn) / k;
    const double denom = s.tp + 0.5 * (s.fn + s.fp);
    s.f1 = denom == 0.0 ? 0.0 : s.tp / denom;
    return s;
}

double f1_score(std::span<const std::uint8_t> pred, std::span<const std::uint8_t> obs) {
    return score_window(pred, obs).f1;
}

}  // namespace occuforge::eval
