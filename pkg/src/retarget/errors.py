"""Exception hierarchy.

Every error carries the name of the pipeline stage that raised it so the CLI
can emit ``ERROR:<module>:<message>`` lines.
"""


class RetargetError(Exception):
    module = "retarget"


class DatasetError(RetargetError):
    module = "dataset_pipeline"


class MaskError(RetargetError):
    module = "mask_generator"


class FFCError(RetargetError):
    module = "ffc_ops"


class GeneratorError(RetargetError):
    module = "generator_net"


class DiscriminatorError(RetargetError):
    module = "discriminator_net"


class LossError(RetargetError):
    module = "losses"


class NonFiniteLossError(LossError):
    def __init__(self, message, batch_ids=()):
        super().__init__(message)
        self.batch_ids = list(batch_ids)


class TrainError(RetargetError):
    module = "trainer"


class CheckpointError(TrainError):
    pass


class InferenceError(RetargetError):
    module = "retarget_inference"


class SeamError(RetargetError):
    module = "seam_carving_baseline"


class EvaluationError(RetargetError):
    module = "evaluation"
