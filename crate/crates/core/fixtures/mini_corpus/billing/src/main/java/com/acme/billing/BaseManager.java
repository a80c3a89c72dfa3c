package com.acme.billing;

public abstract class BaseManager {
    protected int operations = 0;

    protected void record(String action) {
        operations++;
        System.out.println("op: " + action);
    }

    public int getOperations() {
        return operations;
    }
}
