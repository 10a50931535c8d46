# irq-queue: interrupt-reentrant multiwriter queue and its preemption simulator
