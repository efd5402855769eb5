#pragma once

namespace pisindy {

/// Displacement-in, force-out session shared by oracle materials,
/// learned models and the remote coupling client. Displacements are
/// absolute (mm), forces kN. init() primes the session at the first
/// sample and must precede step(). snapshot()/restore() give one slot
/// of rollback so an iterative solver can issue trial steps; restore
/// without a prior snapshot is a protocol error.
class ForceProvider {
public:
    virtual ~ForceProvider() = default;

    virtual double init(double x0) = 0;
    virtual double step(double x) = 0;
    virtual void snapshot() = 0;
    virtual void restore() = 0;
};

/// Linear elastic element R = k * x; the trivial provider used for
/// integrator verification against closed-form oscillator results.
class LinearSpring final : public ForceProvider {
public:
    explicit LinearSpring(double k) : k_(k) {}

    double init(double x0) override { return k_ * x0; }
    double step(double x) override { return k_ * x; }
    void snapshot() override {}
    void restore() override {}

    double stiffness() const { return k_; }

private:
    double k_;
};

} // namespace pisindy
