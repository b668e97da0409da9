from .. import constants, experiments, hierops, models
from .core import Loader
from .input_type import InputType


class RunConfigLoader(Loader):
    def __init__(self, in_dict):
        super().__init__(in_dict, InputType.RUN_CONFIG)
        self.experiment_class = None
        self.model = None
        self.model_options = None

    def _validate(self):
        model = self.input["model"]
        if model.get("couplings") is not None and model.get("n") is not None:
            if len(model["couplings"]) != model["n"]:
                self.errors.append(
                    "model: expected {} couplings, got {}".format(
                        model["n"], len(model["couplings"])
                    )
                )

    def _load(self):
        self.experiment_class = experiments.get_all_experiments()[self.input["experiment"]]
        self.model_options = dict(self.experiment_class.default_model)
        if self.input["model"].get("family") not in (
            None,
            self.model_options.get("family"),
        ):
            self.model_options = {}
        self.model_options.update(
            {k: v for k, v in self.input["model"].items() if v is not None}
        )

        try:
            self.model = models.model_from_dict(
                self.model_options,
                self.input["options"].get(
                    "dense-cap", constants.OPTION_DEFAULTS["dense-cap"]
                ),
            )
        except hierops.HieropsException as e:
            self.errors.append("model: {}".format(e))

    def _post_load_validate(self):
        try:
            self.model.check_capacity()
        except hierops.CapacityError as e:
            self.errors.append("model: {}".format(e))

        self.errors.extend(self.experiment_class.validate_config(self.input, self.model))

    def _initialize(self):
        self.result = self.experiment_class(
            hierops.RunConfig(
                self.input["experiment"],
                self.model,
                model_options=self.model_options,
                realizations=self.input["realizations"],
                seed=self.input["seed"],
                energy=self.input["energy"],
                window=self.input["window"],
                output=self.input["output"],
                workers=self.input["workers"],
                options=self.input["options"],
                echo=self.input,
            )
        )
