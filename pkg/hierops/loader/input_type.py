from .. import hierops


class InputType(hierops.StringEnum):
    RUN_CONFIG = "run-config"
