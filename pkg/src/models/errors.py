"""
领域异常
"""


class NullEventError(ValueError):
    """对概率为零（低于阈值）的事件做条件化"""

    def __init__(self, what: str, probability: float):
        super().__init__(f"{what}: probability {probability:.3e} is below the conditioning floor")
        self.probability = probability


class QuadratureError(RuntimeError):
    """自适应积分未收敛"""
