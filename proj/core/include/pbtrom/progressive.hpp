#pragma once

#include <array>
#include <compare>
#include <cstdint>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "pbtrom/btrom.hpp"

namespace pbtrom::progressive {

enum class AdapterMode { LinearResample, Identity };
const char* adapter_mode_name(AdapterMode m);
AdapterMode parse_adapter_mode(const std::string& name);

/// Fixed, non-trainable map from the child's (scaled) field to a parent's
/// input width: linear interpolation over the flattened field index.
struct InputAdapter {
    AdapterMode mode = AdapterMode::Identity;
    std::int64_t source_dof = 0;
    std::int64_t target_dof = 0;

    /// Identity when the widths agree, LinearResample otherwise.
    static InputAdapter between(std::int64_t source_dof, std::int64_t target_dof);

    Matrix apply(const Matrix& x) const;
    /// Adjoint of apply(); maps target-width gradients back to source width.
    Matrix apply_transpose(const Matrix& g) const;
    bool operator==(const InputAdapter&) const = default;
};

/// Identifies the lateral connection from parent column `parent`'s layer
/// (layer - 1) output into the child's layer `layer` (0-based, layer >= 1).
struct GateKey {
    Component component = Component::Encoder;
    int layer = 1;
    int parent = 0;
    auto operator<=>(const GateKey&) const = default;
};

std::string gate_name(const GateKey& key);

enum class InitMode { Scratch, ParentAverage };
const char* init_mode_name(InitMode m);
InitMode parse_init_mode(const std::string& name);

/// Frozen parent columns followed by one trainable child, plus the gates.
struct ProgressiveStack {
    std::vector<btrom::Column> columns;
    std::map<GateKey, net::DenseLayer> gates;
    std::vector<InputAdapter> adapters; ///< one per parent

    std::size_t child_index() const { return columns.size() - 1; }
    std::size_t parent_count() const { return columns.size() - 1; }
    const btrom::Column& child() const { return columns.back(); }
    btrom::Column& child() { return columns.back(); }

    /// Gate set, shapes, adapter widths and freeze flags must be consistent.
    void validate() const;
    bool operator==(const ProgressiveStack&) const = default;
};

/// A stack with no parents wrapping one column.
ProgressiveStack standalone(btrom::Column column);

/// New child column (build_column with `seed`) behind the given frozen
/// parents, zero-initialized gates into every layer >= 1 of every component,
/// and one adapter per parent. ParentAverage sets each child layer to the
/// mean of the shape-matching parent layers.
ProgressiveStack attach_child(std::vector<btrom::Column> parents, std::int64_t child_dof,
                              std::int64_t latent_dim, std::int64_t projector_dim, InitMode init,
                              std::uint64_t seed);

struct ProgressiveForward {
    Matrix output; ///< child output of the component
    btrom::ComponentTrace trace;
};

/// Gated forward pass of one component on scaled input. The encoder feeds
/// each parent adapter(x); decoder and projector feed every column the same
/// latent batch. Parents evaluate only the layers that feed gates.
ProgressiveForward forward_progressive(const ProgressiveStack& stack, const Matrix& input,
                                       Component component, bool record = true);

/// Output of layer `layer` of column `column` recorded in a trace.
Matrix traced_activation(const btrom::ComponentTrace& trace, std::size_t column, std::size_t layer,
                         const ProgressiveStack& stack);

/// TrainableModel over the child and the gates; parents are read-only.
class StackModel final : public btrom::TrainableModel {
public:
    explicit StackModel(ProgressiveStack& stack);

    Matrix forward(Component c, const Matrix& input, btrom::ComponentTrace* trace) const override;
    Matrix backward(const btrom::ComponentTrace& trace, const Matrix& upstream,
                    bool want_input_grad) override;
    std::vector<net::ParamRef> parameters(Component c) override;
    void zero_grad() override;

    const net::LayerGrads& child_grad(Component c, std::size_t layer) const {
        return child_grads_[static_cast<int>(c)][layer];
    }
    const net::LayerGrads& gate_grad(const GateKey& key) const { return gate_grads_.at(key); }

private:
    ProgressiveStack& stack_;
    std::vector<net::LayerGrads> child_grads_[3];
    std::map<GateKey, net::LayerGrads> gate_grads_;
};

/// Trains child and gates with the shared loop; parents stay bitwise unchanged.
std::pair<ProgressiveStack, btrom::TrainReport> train_child(ProgressiveStack stack,
                                                            const datagen::SnapshotSet& set,
                                                            const btrom::TrainConfig& config);

/// Scaled encode / decode through the whole stack.
Matrix encode_scaled(const ProgressiveStack& stack, const Matrix& x_scaled);
Matrix decode_scaled(const ProgressiveStack& stack, const Matrix& z);

/// Reconstruction of raw fields by column `index`. Parents run standalone;
/// the child index runs the gated stack.
Matrix predict_with_column(const ProgressiveStack& stack, std::size_t index, const Matrix& x);

struct ComponentCounts {
    std::size_t child = 0;
    std::size_t gates = 0;
    std::size_t parents = 0; ///< frozen
    std::size_t trainable() const { return child + gates; }
    std::size_t total() const { return child + gates + parents; }
};

struct ParameterCounts {
    std::array<ComponentCounts, 3> per_component{};
    std::size_t gate_count[3] = {0, 0, 0};

    const ComponentCounts& operator[](Component c) const { return per_component[static_cast<int>(c)]; }
    std::size_t trainable() const;
    std::size_t frozen() const;
};

ParameterCounts count_parameters(const ProgressiveStack& stack);

/// SHA-256 of each parent's parameters, in column order.
std::vector<std::string> parent_digests(const ProgressiveStack& stack);

} // namespace pbtrom::progressive
