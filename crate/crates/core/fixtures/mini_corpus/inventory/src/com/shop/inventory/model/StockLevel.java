package com.shop.inventory.model;

public class StockLevel {
    public static final int LOW_WATERMARK = 5;
    private int quantity;

    public StockLevel(int quantity) {
        this.quantity = quantity;
    }

    public boolean isLow() {
        return quantity < LOW_WATERMARK;
    }

    public void adjust(int delta) {
        quantity = Math.max(0, quantity + delta);
    }

    public int getQuantity() {
        return quantity;
    }
}
