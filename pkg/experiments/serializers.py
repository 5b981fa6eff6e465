"""
Serializers for configurations and estimation records.
"""
from pathlib import Path
import math

from rest_framework import serializers

from estimator.hybrid import QneeConfig
from estimator.training import TrainConfig
from vqse.hamiltonian import VqseConfig

from .config import METHODS, SweepConfig


def _finite_or_none(value):
    if value is None:
        return None
    value = float(value)
    return value if math.isfinite(value) else None


class TrainConfigSerializer(serializers.Serializer):
    """Serializer for network training settings."""

    learning_rate = serializers.FloatField(min_value=0.0)
    weight_decay = serializers.FloatField(min_value=0.0)
    n_iter = serializers.IntegerField(min_value=1)
    batch_size = serializers.IntegerField(min_value=1, allow_null=True, required=False, default=None)
    test_eval_period = serializers.IntegerField(min_value=1, required=False, default=10)
    alpha = serializers.FloatField(allow_null=True, required=False, default=None)
    seed = serializers.IntegerField(min_value=0, required=False, default=0)

    def validate_learning_rate(self, value):
        """Validate learning rate."""
        if value <= 0:
            raise serializers.ValidationError("Learning rate must be positive.")
        return value

    def validate_alpha(self, value):
        """Validate the Renyi order (null selects von Neumann)."""
        if value is None:
            return value
        if value <= 0:
            raise serializers.ValidationError("Renyi order must be positive.")
        if abs(value - 1.0) <= 1e-9:
            raise serializers.ValidationError("Use null instead of 1 for the von Neumann cost.")
        return value

    def create(self, validated_data):
        return TrainConfig(**validated_data)


class QneeConfigSerializer(serializers.Serializer):
    """Serializer for the outer-loop settings of QNEE."""

    eta_q = serializers.FloatField()
    fd_step = serializers.FloatField()
    fd_scheme = serializers.ChoiceField(choices=['forward', 'central'], default='forward')
    n_outer = serializers.IntegerField(min_value=0)
    n_shots = serializers.IntegerField(min_value=1)
    n_trials = serializers.IntegerField(min_value=1)
    noise_free = serializers.BooleanField(default=False)
    exact_weights = serializers.BooleanField(default=False)
    init = serializers.ChoiceField(choices=['random', 'identity'], default='random')
    embed_dim = serializers.IntegerField(min_value=1, default=64)
    hidden_width = serializers.IntegerField(min_value=1, default=256)
    warm_start = serializers.CharField(allow_null=True, required=False, default=None)

    def validate_eta_q(self, value):
        """Validate circuit learning rate."""
        if value <= 0:
            raise serializers.ValidationError("eta_q must be positive.")
        return value

    def validate_fd_step(self, value):
        """Validate finite-difference step."""
        if value <= 0:
            raise serializers.ValidationError("fd_step must be positive.")
        return value

    def validate(self, data):
        """Noise-free mode never trains, so exact weights and warm starts would be ignored."""
        if data.get('noise_free') and data.get('exact_weights'):
            raise serializers.ValidationError("noise_free and exact_weights are mutually exclusive.")
        if data.get('noise_free') and data.get('warm_start'):
            raise serializers.ValidationError("noise_free has no network to warm-start.")
        return data

    def create(self, validated_data):
        """Build a QneeConfig; n_layers, seed, workers and the training configs come from context."""
        return QneeConfig(
            n_layers=self.context['n_layers'],
            seed=self.context.get('seed', 1234),
            nn_initial=self.context.get('nn_initial', TrainConfig(n_iter=10000)),
            nn_step=self.context.get('nn_step', TrainConfig(n_iter=100)),
            workers=self.context.get('workers', 1),
            **validated_data,
        )


class VqseConfigSerializer(serializers.Serializer):
    """Serializer for the eigensolver baseline settings."""

    r1 = serializers.FloatField()
    delta_r = serializers.FloatField(min_value=0.0)
    m = serializers.IntegerField(min_value=1, allow_null=True, required=False, default=None)
    t_update_period = serializers.IntegerField(min_value=1)
    learning_rate = serializers.FloatField()
    fd_step = serializers.FloatField()
    n_iter = serializers.IntegerField(min_value=0)
    n_shots = serializers.IntegerField(min_value=1)
    n_trials = serializers.IntegerField(min_value=1)
    noise_free = serializers.BooleanField(default=False)
    init = serializers.ChoiceField(choices=['random', 'identity'], default='random')

    def validate_r1(self, value):
        """Validate the first local field."""
        if value <= 0:
            raise serializers.ValidationError("r1 must be positive.")
        return value

    def validate(self, data):
        """Learning rate and step must be positive."""
        if data['learning_rate'] <= 0 or data['fd_step'] <= 0:
            raise serializers.ValidationError("learning_rate and fd_step must be positive.")
        return data

    def create(self, validated_data):
        return VqseConfig(
            ell=self.context['ell'],
            n_layers=self.context.get('n_layers', 2),
            seed=self.context.get('seed', 1234),
            **validated_data,
        )


class SweepConfigSerializer(serializers.Serializer):
    """Serializer for a complete sweep configuration."""

    L = serializers.IntegerField(min_value=2, max_value=12)
    delta = serializers.FloatField()
    lambda_grid = serializers.ListField(child=serializers.FloatField(), allow_empty=False)
    subsystems = serializers.ListField(child=serializers.IntegerField(min_value=1), allow_empty=False)
    method = serializers.ChoiceField(choices=list(METHODS))
    seed = serializers.IntegerField(min_value=0)
    workers = serializers.IntegerField(min_value=1)
    output_dir = serializers.CharField()
    layers_by_subsystem = serializers.DictField(child=serializers.IntegerField(min_value=1))
    qnee = QneeConfigSerializer()
    nn_initial = TrainConfigSerializer()
    nn_step = TrainConfigSerializer()
    vqse = VqseConfigSerializer()

    def validate_subsystems(self, value):
        """Validate subsystem sizes."""
        if len(set(value)) != len(value):
            raise serializers.ValidationError("Duplicate subsystem sizes are not allowed.")
        return value

    def validate_layers_by_subsystem(self, value):
        """Keys are subsystem sizes (JSON object keys arrive as strings)."""
        try:
            return {int(size): layers for size, layers in value.items()}
        except ValueError:
            raise serializers.ValidationError("Keys must be integer subsystem sizes.")

    def validate(self, data):
        """Cross-field checks."""
        for size in data['subsystems']:
            if size >= data['L']:
                raise serializers.ValidationError(
                    {'subsystems': f"Subsystem size {size} must be smaller than L={data['L']}."}
                )
            if data['method'] == 'exact':
                continue
            if size < 2:
                raise serializers.ValidationError(
                    {'subsystems': "Estimation needs subsystems of at least 2 qubits."}
                )
            layers = data['layers_by_subsystem'].get(size)
            if layers is None:
                raise serializers.ValidationError(
                    {'layers_by_subsystem': f"No layer count for subsystem size {size}."}
                )
            if size % 2 == 1 and layers % 2 == 1:
                raise serializers.ValidationError(
                    {'layers_by_subsystem': f"Odd subsystem size {size} needs an even layer count."}
                )
            m = data['vqse'].get('m')
            if m is not None and m >= 1 << size:
                raise serializers.ValidationError({'vqse': f"m={m} must be below 2^{size}."})
        if data['nn_initial'].get('alpha') != data['nn_step'].get('alpha'):
            raise serializers.ValidationError({'nn_step': "alpha must match nn_initial."})
        return data

    def create(self, validated_data):
        return SweepConfig(
            L=validated_data['L'],
            delta=validated_data['delta'],
            lambda_grid=tuple(validated_data['lambda_grid']),
            subsystems=tuple(validated_data['subsystems']),
            method=validated_data['method'],
            seed=validated_data['seed'],
            workers=validated_data['workers'],
            output_dir=Path(validated_data['output_dir']),
            layers_by_subsystem=dict(validated_data['layers_by_subsystem']),
            qnee=dict(validated_data['qnee']),
            nn_initial=TrainConfigSerializer().create(dict(validated_data['nn_initial'])),
            nn_step=TrainConfigSerializer().create(dict(validated_data['nn_step'])),
            vqse=dict(validated_data['vqse']),
        )


class IterationRecordSerializer(serializers.Serializer):
    """Serializer for one learning-curve point."""

    trial = serializers.IntegerField(read_only=True)
    outer_iter = serializers.IntegerField(read_only=True)
    stage = serializers.CharField(read_only=True)
    c_nn = serializers.FloatField(read_only=True)
    ideal_cost = serializers.FloatField(read_only=True)
    params_key = serializers.CharField(read_only=True)


class TrialRecordSerializer(serializers.Serializer):
    """Serializer for a per-trial summary."""

    trial = serializers.IntegerField(read_only=True)
    status = serializers.SerializerMethodField()
    estimate = serializers.SerializerMethodField()
    best_cost = serializers.SerializerMethodField()
    error = serializers.CharField(read_only=True, allow_null=True)
    steps = serializers.SerializerMethodField()

    def get_status(self, obj):
        return 'failed' if obj.failed else 'ok'

    def get_estimate(self, obj):
        return None if obj.failed else _finite_or_none(obj.entropy)

    def get_best_cost(self, obj):
        return _finite_or_none(obj.best_cost)

    def get_steps(self, obj):
        return len(obj.history)


class EstimationRecordSerializer(serializers.Serializer):
    """Serializer for an estimation record (JSON output)."""

    method = serializers.CharField(read_only=True)
    n_qubits = serializers.IntegerField(read_only=True)
    estimate = serializers.FloatField(read_only=True)
    best_cost = serializers.FloatField(read_only=True)
    best_trial = serializers.IntegerField(read_only=True)
    alpha = serializers.FloatField(read_only=True, allow_null=True)
    exact_entropy = serializers.FloatField(read_only=True, allow_null=True)
    absolute_error = serializers.FloatField(read_only=True, allow_null=True)
    vn_companion = serializers.FloatField(read_only=True, allow_null=True)
    eigenvalues = serializers.SerializerMethodField()
    eigenstrings = serializers.SerializerMethodField()
    best_angles = serializers.SerializerMethodField()
    n_layers = serializers.SerializerMethodField()
    trials = TrialRecordSerializer(many=True, read_only=True)

    def get_eigenvalues(self, obj):
        return [float(value) for value in obj.eigenvalues]

    def get_eigenstrings(self, obj):
        return [format(index, f'0{obj.n_qubits}b') for index in obj.eigen_order[:len(obj.eigenvalues)]]

    def get_best_angles(self, obj):
        return [float(angle) for angle in obj.best_params.angles]

    def get_n_layers(self, obj):
        return obj.best_params.n_layers
