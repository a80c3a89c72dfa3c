package com.shop.inventory;

public class Category {
    private final String name;

    public Category(String name) {
        this.name = name;
    }

    public String getName() {
        return name;
    }

    static class Node extends Category {
        Node(String name) {
            super(name);
        }
    }
}
