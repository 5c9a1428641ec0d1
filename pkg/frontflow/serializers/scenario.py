from rest_framework import serializers


class ScalarFunctionSerializer(serializers.Serializer):
    """Scalar function block; a bare number stands for a constant function."""

    kind = serializers.ChoiceField(choices=['constant', 'affine', 'power'], default='constant')
    value = serializers.FloatField(default=0.0)
    intercept = serializers.FloatField(default=0.0)
    slope = serializers.FloatField(default=0.0)
    coefficient = serializers.FloatField(default=1.0)
    exponent = serializers.FloatField(default=1.0)

    def to_internal_value(self, data):
        if isinstance(data, (int, float)) and not isinstance(data, bool):
            data = {'kind': 'constant', 'value': data}
        return super().to_internal_value(data)


class GridSerializer(serializers.Serializer):
    dim = serializers.ChoiceField(choices=[1, 2, 3])
    half_extent = serializers.FloatField(min_value=1e-12)
    points_per_axis = serializers.IntegerField(min_value=3)
    t_final = serializers.FloatField(min_value=1e-12)
    dt = serializers.FloatField(required=False, allow_null=True, min_value=1e-12)

    def validate(self, data):
        if data.get('dt') is None:
            data['dt'] = data['t_final'] / 20.0
        return data


class KernelSerializer(serializers.Serializer):
    name = serializers.ChoiceField(choices=['gaussian', 'constant', 'mexican_hat'], required=False)
    path = serializers.CharField(required=False)
    sigma = serializers.FloatField(required=False, min_value=1e-12)
    amplitude = serializers.FloatField(required=False)
    a1 = serializers.FloatField(required=False)
    a2 = serializers.FloatField(required=False)
    value = serializers.FloatField(required=False)
    radius_nodes = serializers.IntegerField(required=False, allow_null=True, min_value=1)

    def validate(self, data):
        if ('name' in data) == ('path' in data):
            raise serializers.ValidationError("Give exactly one of 'name' or 'path'")
        if data.get('name') in ('gaussian', 'mexican_hat') and 'sigma' not in data:
            raise serializers.ValidationError({'sigma': "This kernel needs a width"})
        return data


class LawSerializer(serializers.Serializer):
    tag = serializers.ChoiceField(choices=[
        'constant', 'dislocation', 'fitzhugh_nagumo', 'volume_dependent', 'curvature_only',
    ])
    speed = serializers.FloatField(default=1.0)
    kernel = KernelSerializer(required=False)
    drift = serializers.FloatField(default=0.0)
    drift_bound = serializers.FloatField(required=False, allow_null=True, min_value=0.0)
    with_curvature = serializers.BooleanField(default=False)
    alpha = ScalarFunctionSerializer(required=False)
    g_plus = ScalarFunctionSerializer(required=False)
    g_minus = ScalarFunctionSerializer(required=False)
    beta = ScalarFunctionSerializer(required=False)
    g_lower = serializers.FloatField(default=0.0)
    g_upper = serializers.FloatField(default=0.0)
    v0 = serializers.FloatField(default=0.0)
    v0_path = serializers.CharField(required=False)

    REQUIRED_BY_TAG = {
        'dislocation': ('kernel',),
        'fitzhugh_nagumo': ('alpha', 'g_plus', 'g_minus'),
        'volume_dependent': ('beta',),
    }

    def validate(self, data):
        missing = [name for name in self.REQUIRED_BY_TAG.get(data['tag'], ()) if name not in data]
        if missing:
            raise serializers.ValidationError(
                {name: f"Required for the '{data['tag']}' law" for name in missing}
            )
        if data['g_lower'] > data['g_upper']:
            raise serializers.ValidationError({'g_lower': "g_lower cannot exceed g_upper"})
        return data


class InitialSerializer(serializers.Serializer):
    kind = serializers.ChoiceField(choices=['ball', 'union_of_balls', 'plane'])
    centers = serializers.ListField(child=serializers.ListField(child=serializers.FloatField()), required=False)
    radii = serializers.ListField(child=serializers.FloatField(min_value=1e-12), required=False)
    normal = serializers.ListField(child=serializers.FloatField(), required=False)
    offset = serializers.FloatField(default=0.0)

    def validate(self, data):
        if data['kind'] == 'plane':
            if not data.get('normal'):
                raise serializers.ValidationError({'normal': "A plane needs a normal"})
            return data
        centers, radii = data.get('centers') or [], data.get('radii') or []
        if not radii or len(centers) != len(radii):
            raise serializers.ValidationError({'radii': "Give one radius per center and at least one ball"})
        if data['kind'] == 'ball' and len(radii) != 1:
            raise serializers.ValidationError({'radii': "A ball has exactly one radius"})
        return data


class StepperSerializer(serializers.Serializer):
    curvature_enabled = serializers.BooleanField(default=False)
    grad_regularization = serializers.FloatField(required=False, allow_null=True, min_value=1e-12)
    cfl_safety = serializers.FloatField(default=0.5, min_value=1e-6, max_value=1.0)
    redistance_every = serializers.IntegerField(default=0, min_value=0)
    curvature_scheme = serializers.ChoiceField(choices=['median', 'central'], default='median')


class FixedPointSerializer(serializers.Serializer):
    relaxation = serializers.FloatField(default=0.5, min_value=1e-12, max_value=1.0)
    max_iterations = serializers.IntegerField(default=50, min_value=1)
    tol_l1 = serializers.FloatField(required=False, allow_null=True, min_value=0.0)


class BarrierSerializer(serializers.Serializer):
    beta = ScalarFunctionSerializer(required=False)
    initial_radius = serializers.FloatField(required=False, allow_null=True, min_value=1e-12)
    ode_dt = serializers.FloatField(default=1e-3, min_value=1e-12)
    tolerance = serializers.FloatField(required=False, allow_null=True, min_value=0.0)


class OutputSerializer(serializers.Serializer):
    directory = serializers.CharField(required=False, allow_blank=True)
    dump_stride = serializers.IntegerField(default=1, min_value=1)
    formats = serializers.ListField(
        child=serializers.ChoiceField(choices=['ffld', 'csv']),
        default=['ffld'],
    )


class ScenarioSerializer(serializers.Serializer):
    """Complete scenario file; optional blocks are filled with their defaults."""

    seed = serializers.IntegerField(required=False, allow_null=True)
    grid = GridSerializer()
    law = LawSerializer()
    initial = InitialSerializer()
    chi_path = serializers.CharField(required=False)
    stepper = StepperSerializer(required=False)
    fixedpoint = FixedPointSerializer(required=False)
    barrier = BarrierSerializer(required=False)
    output = OutputSerializer(required=False)

    OPTIONAL_BLOCKS = {
        'stepper': StepperSerializer,
        'fixedpoint': FixedPointSerializer,
        'output': OutputSerializer,
    }

    def validate(self, data):
        for name, serializer_class in self.OPTIONAL_BLOCKS.items():
            if name not in data:
                block = serializer_class(data={})
                block.is_valid(raise_exception=True)
                data[name] = dict(block.validated_data)

        dim = data['grid']['dim']
        initial = data['initial']
        vectors = initial.get('centers') or [initial.get('normal') or []]
        if any(len(v) != dim for v in vectors):
            raise serializers.ValidationError({'initial': f"Coordinates must have {dim} components"})
        return data
