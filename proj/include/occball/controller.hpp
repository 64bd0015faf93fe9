#pragma once

#include <memory>

#include "occball/linalg.hpp"

namespace occball {

/// Anything that turns the latest measurement into a cart force.
class Controller {
public:
    virtual ~Controller() = default;
    /// Called at the start of every episode.
    virtual void reset() = 0;
    /// Latest measurement y in metres -> force in newtons.
    virtual double act(double y) = 0;
};

class ZeroController final : public Controller {
public:
    void reset() override {}
    double act(double /*y*/) override { return 0.0; }
};

/// Runs a discrete SISO LTI model as a controller: u = C s + D y, s <- A s + B y.
/// The model maps measurement to force directly (positive-feedback convention).
class LtiController final : public Controller {
public:
    explicit LtiController(StateSpaceModel model);
    void reset() override;
    double act(double y) override;
    [[nodiscard]] const StateSpaceModel& model() const { return model_; }

private:
    StateSpaceModel model_;
    Vec state_;
};

}  // namespace occball
